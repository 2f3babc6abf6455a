use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::demos::{synth_demo_suite, ManoeuvreConfig};
use super::filters::{CommandWindow, FilterBank, FilterSpec, N_FILTERS, WINDOW_LEN};
use super::model::{model_from_bytes, model_to_bytes};
use super::network::{Architecture, Network};
use super::train::{loss_and_gradients, train, windows_from_demos, Sample, TrainConfig};

fn random_window(rng: &mut ChaCha8Rng) -> CommandWindow {
    // piecewise-constant segments look more like stick input than white noise
    let mut s = Vec::with_capacity(WINDOW_LEN);
    let mut cur = [0.0, 0.0];
    for _ in 0..WINDOW_LEN {
        if rng.random_bool(0.03) {
            cur = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        }
        s.push(cur);
    }
    CommandWindow::new(s).unwrap()
}

fn perturb(net: &mut Network, rng: &mut ChaCha8Rng, scale: f64) {
    for p in net.params_mut() {
        *p += rng.random_range(-scale..scale);
    }
}

#[test]
fn heads_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::new(Architecture::reference(), 3).unwrap();
    let zero = net.gating_forward(&CommandWindow::zeros()).unwrap();
    assert!(zero.iter().flatten().all(|p| p.is_finite()));
    for _ in 0..10 {
        let probs = net.gating_forward(&random_window(&mut rng)).unwrap();
        for p in &probs {
            assert_eq!(p.len(), N_FILTERS);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
    assert!(Network::new(Architecture::plain_conv(), 1).unwrap().gating_forward(&CommandWindow::zeros()).is_none());
}

#[test]
fn output_is_convex_in_filtered_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = Network::new(Architecture::tiny(), 5).unwrap();
    for _ in 0..200 {
        perturb(&mut net, &mut rng, 0.5);
        let w = random_window(&mut rng);
        let out = net.shape_command(&w);
        let f = FilterBank::build().apply(&w);
        for c in 0..2 {
            let lo = f.iter().map(|x| x[c]).fold(f64::INFINITY, f64::min);
            let hi = f.iter().map(|x| x[c]).fold(f64::NEG_INFINITY, f64::max);
            assert!(out[c] >= lo - 1e-12 && out[c] <= hi + 1e-12);
        }
    }
}

/// Pins the output bias of each head so the softmax puts all its mass on the
/// filters selected by `keep`.
fn pin_gating(net: &mut Network, keep: impl Fn(usize) -> bool) {
    for h in 0..2 {
        for f in 0..N_FILTERS {
            let (w, n, b) = net.output_row(h, f);
            net.params_mut()[w..w + n].fill(0.0);
            net.params_mut()[b] = if keep(f) { 0.0 } else { -1e3 };
        }
    }
}

#[test]
fn constant_window_bounds() {
    let c = 0.6;
    let w = CommandWindow::new(vec![[c, c]; WINDOW_LEN]).unwrap();
    let mut net = Network::new(Architecture::reference(), 8).unwrap();
    let out = net.shape_command(&w);
    assert!(out.iter().all(|&y| y >= 0.9f64.powi(32) * c - 1e-15 && y <= c + 1e-15));

    pin_gating(&mut net, |f| f < 32);
    let out = net.shape_command(&w);
    assert!((out[0] - c).abs() < 1e-12 && (out[1] - c).abs() < 1e-12);

    pin_gating(&mut net, |f| f == 0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_window(&mut rng);
    assert_eq!(net.shape_command(&w), w.latest());
}

#[test]
fn permuting_filters_with_head_rows_is_invisible() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = Network::new(Architecture::tiny(), 2).unwrap();
    let mut net = net;
    perturb(&mut net, &mut rng, 0.3);
    let mut swapped = net.clone();
    let (a, b) = (3, 40);
    swapped.bank_mut().swap(a, b);
    for h in 0..2 {
        let (wa, n, ba) = swapped.output_row(h, a);
        let (wb, _, bb) = swapped.output_row(h, b);
        let p = swapped.params_mut();
        for i in 0..n {
            p.swap(wa + i, wb + i);
        }
        p.swap(ba, bb);
    }
    for _ in 0..20 {
        let w = random_window(&mut rng);
        let (x, y) = (net.shape_command(&w), swapped.shape_command(&w));
        assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
    }
}

fn tiny_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    let bank = FilterBank::build();
    (0..n)
        .map(|_| Sample::new(&random_window(rng), &bank, [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
        .collect()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut net = Network::new(Architecture::tiny(), 4).unwrap();
    perturb(&mut net, &mut rng, 0.2);
    let batch = tiny_batch(&mut rng, 4);
    let cfg = TrainConfig { l2: 1e-3, ..Default::default() };
    let (_, grads) = loss_and_gradients(&net, &batch, &cfg, None).unwrap();
    let h = 1e-6;
    let mut checked = 0;
    while checked < 20 {
        let i = rng.random_range(0..net.params().len());
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        let lp = loss_and_gradients(&plus, &batch, &cfg, None).unwrap().0.total();
        let lm = loss_and_gradients(&minus, &batch, &cfg, None).unwrap().0.total();
        let fd = (lp - lm) / (2.0 * h);
        if fd.abs() < 1e-8 && grads[i].abs() < 1e-8 {
            continue;
        }
        let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs());
        assert!(rel < 1e-4, "param {i}: analytic {} vs numeric {fd}", grads[i]);
        checked += 1;
    }
}

#[test]
fn exact_targets_give_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = Network::new(Architecture::tiny(), 1).unwrap();
    let mut batch = tiny_batch(&mut rng, 5);
    for s in &mut batch {
        s.target = net.forward_raw(&s.input, &s.filtered, None).output;
    }
    let cfg = TrainConfig { l2: 0.0, ..Default::default() };
    let (loss, grads) = loss_and_gradients(&net, &batch, &cfg, None).unwrap();
    assert_eq!(loss.total(), 0.0);
    assert!(grads.iter().all(|g| *g == 0.0));

    let one = loss_and_gradients(&net, &batch, &TrainConfig { l2: 1e-4, ..cfg }, None).unwrap().0;
    let two = loss_and_gradients(&net, &batch, &TrainConfig { l2: 2e-4, ..cfg }, None).unwrap().0;
    assert_eq!(two.l2, 2.0 * one.l2);
    assert_eq!(one.mse, two.mse);
}

fn small_problem() -> (Vec<Sample>, Vec<Sample>) {
    let suite = synth_demo_suite(&ManoeuvreConfig::default()).unwrap();
    let bank = FilterBank::build();
    (windows_from_demos(&suite[..3], &bank, 10).unwrap(), windows_from_demos(&suite[3..], &bank, 20).unwrap())
}

#[test]
fn training_descends_and_is_deterministic() {
    let (tr, val) = small_problem();
    let cfg = TrainConfig { max_epochs: 50, stop_val_loss: 0.0, learning_rate: 2e-3, ..Default::default() };
    let a = train(Network::new(Architecture::tiny(), 11).unwrap(), &tr, &val, &cfg).unwrap();
    assert!(a.curve[50].train_loss < a.curve[0].train_loss);
    let b = train(Network::new(Architecture::tiny(), 11).unwrap(), &tr, &val, &cfg).unwrap();
    assert_eq!(a.net.params(), b.net.params());
    assert_eq!(a.curve, b.curve);
}

#[test]
fn divergence_aborts() {
    let (tr, val) = small_problem();
    let cfg = TrainConfig { max_epochs: 3, divergence: 1e-9, ..Default::default() };
    let err = train(Network::new(Architecture::tiny(), 1).unwrap(), &tr, &val, &cfg).unwrap_err();
    assert!(matches!(err, crate::Error::Diverged(_)));
    let short = &tr[..10];
    assert!(train(Network::new(Architecture::tiny(), 1).unwrap(), short, &val, &TrainConfig::default()).is_err());
}

#[test]
fn model_file_roundtrip() {
    for arch in [Architecture::reference(), Architecture::dense_baseline(), Architecture::plain_conv()] {
        let net = Network::new(arch, 12).unwrap();
        let bytes = model_to_bytes(&net, "quadshape train-shaper --seed 12").unwrap();
        let (back, inv) = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(inv, "quadshape train-shaper --seed 12");
        assert!(model_from_bytes(&bytes[..bytes.len() - 8]).is_err());
    }
    // a manifest that disagrees with the stored architecture is rejected
    let net = Network::new(Architecture::tiny(), 1).unwrap();
    let mut bytes = model_to_bytes(&net, "x").unwrap();
    let pos = bytes.windows(14).position(|w| w == b"trunk.0.weight").unwrap();
    bytes[pos] = b'T';
    assert!(model_from_bytes(&bytes).is_err());
}

#[test]
fn bank_specs_are_validated() {
    let mut specs = FilterBank::build().specs().to_vec();
    specs[0] = FilterSpec::MovingAverage(0);
    assert!(FilterBank::from_specs(specs).is_err());
    assert!(FilterBank::from_specs(vec![FilterSpec::Scale(0.5); 3]).is_err());
}
