use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::demos::DemoPair;
use super::filters::{CommandWindow, FilterBank};
use super::network::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    /// Drop probability on the head inputs.
    pub dropout: f64,
    pub batch: usize,
    /// Training stops once the validation loss falls below this.
    pub stop_val_loss: f64,
    pub max_epochs: usize,
    /// A batch loss above this aborts training.
    pub divergence: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stride between consecutive training windows, samples.
    pub window_stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            l2: 1e-6,
            dropout: 0.5,
            batch: 64,
            stop_val_loss: 1e-2,
            max_epochs: 300,
            divergence: 1e3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            window_stride: 5,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.divergence, self.epsilon]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.l2 < 0.0 || self.stop_val_loss < 0.0 {
            return Err(Error::Config("training rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.batch == 0 || self.window_stride == 0 {
            return Err(Error::Config("batch and window stride must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One training pair with its network input and filter outputs precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub filtered: Vec<[f64; 2]>,
    pub target: [f64; 2],
}

impl Sample {
    pub fn new(window: &CommandWindow, bank: &FilterBank, target: [f64; 2]) -> Self {
        Self { input: window.channel_major(), filtered: bank.apply(window), target }
    }
}

/// Sliding windows over each demo, every `stride` samples; the target is the
/// expert sample aligned with the window's newest novice sample.
pub fn windows_from_demos(demos: &[DemoPair], bank: &FilterBank, stride: usize) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for d in demos {
        for end in (0..d.len()).step_by(stride.max(1)) {
            let w = CommandWindow::ending_at(&d.novice, end)?;
            out.push(Sample::new(&w, bank, d.expert[end]));
        }
    }
    Ok(out)
}

/// Mean squared error over both channels, inference mode.
pub fn mse(net: &Network, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sq: f64 = samples
        .iter()
        .map(|s| {
            let y = net.forward_raw(&s.input, &s.filtered, None).output;
            (y[0] - s.target[0]).powi(2) + (y[1] - s.target[1]).powi(2)
        })
        .sum();
    sq / (2 * samples.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub mse: f64,
    pub l2: f64,
}

impl Loss {
    pub fn total(&self) -> f64 {
        self.mse + self.l2
    }
}

/// Batch loss `MSE + l2·‖θ‖²` and its gradient. Dropout is active when `rng`
/// is given.
pub fn loss_and_gradients(
    net: &Network,
    batch: &[Sample],
    cfg: &TrainConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Loss, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let params = net.params();
    let mut grads = vec![0.0; params.len()];
    let n = (2 * batch.len()) as f64;
    let mut sq = 0.0;
    for s in batch {
        let dropout = rng.as_deref_mut().map(|r| (cfg.dropout, r));
        let tr = net.forward_raw(&s.input, &s.filtered, dropout);
        let e = [tr.output[0] - s.target[0], tr.output[1] - s.target[1]];
        sq += e[0] * e[0] + e[1] * e[1];
        net.backward(&tr, &s.filtered, [2.0 * e[0] / n, 2.0 * e[1] / n], &mut grads);
    }
    let l2 = cfg.l2 * params.iter().map(|p| p * p).sum::<f64>();
    for (g, p) in grads.iter_mut().zip(params) {
        *g += 2.0 * cfg.l2 * p;
    }
    let loss = Loss { mse: sq / n, l2 };
    if !loss.total().is_finite() {
        return Err(Error::NonFinite(format!("loss {}", loss.total())));
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grads[i] * grads[i];
            params[i] -= cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Inference-mode MSE on the training windows.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub net: Network,
    pub best_epoch: usize,
    pub curve: Vec<EpochStats>,
    pub reached_target: bool,
}

impl TrainOutcome {
    pub fn best(&self) -> EpochStats {
        self.curve[self.best_epoch]
    }
}

/// Mini-batch Adam from `net`'s current parameters. Epoch 0 in the curve is
/// the untrained model.
pub fn train(mut net: Network, train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.len() < cfg.batch {
        return Err(Error::Config(format!("{} training windows, fewer than one batch of {}", train.len(), cfg.batch)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.params().len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let evaluate = |net: &Network, epoch| EpochStats { epoch, train_loss: mse(net, train), val_loss: mse(net, val) };

    let mut curve = vec![evaluate(&net, 0)];
    let mut best = (0, net.params().to_vec());
    let mut reached = curve[0].val_loss < cfg.stop_val_loss;
    let mut batch = Vec::with_capacity(cfg.batch);
    for epoch in 1..=cfg.max_epochs {
        if reached {
            break;
        }
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (loss, grads) = loss_and_gradients(&net, &batch, cfg, Some(&mut rng))
                .map_err(|e| Error::Diverged(format!("epoch {epoch} batch {b}: {e}")))?;
            if loss.total() > cfg.divergence {
                return Err(Error::Diverged(format!("epoch {epoch} batch {b}: loss {:.3e}", loss.total())));
            }
            adam.step(net.params_mut(), &grads, cfg);
        }
        let stats = evaluate(&net, epoch);
        debug!("epoch {epoch}: train {:.3e} val {:.3e}", stats.train_loss, stats.val_loss);
        if stats.val_loss < curve[best.0].val_loss {
            best = (epoch, net.params().to_vec());
        }
        reached = stats.val_loss < cfg.stop_val_loss;
        curve.push(stats);
    }
    let best_epoch = best.0;
    net.set_params(best.1)?;
    info!(
        "{}: best epoch {best_epoch} of {}, val {:.3e}",
        net.kind().name(),
        curve.len() - 1,
        curve[best_epoch].val_loss
    );
    Ok(TrainOutcome { net, best_epoch, curve, reached_target: reached })
}
