use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::filters::{CommandWindow, FilterBank, CHANNELS, N_FILTERS, WINDOW_LEN};
use super::nn::{LayerSpec, Stack};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Softmax gating over the filter bank.
    Shaper,
    /// Fully connected regression straight to `(v, r)`.
    Dense,
    /// Convolutional regression straight to `(v, r)`.
    PlainConv,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Shaper => "shaper",
            Self::Dense => "dense",
            Self::PlainConv => "plain-conv",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shaper" => Ok(Self::Shaper),
            "dense" => Ok(Self::Dense),
            "plain-conv" => Ok(Self::PlainConv),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Layer layout of a model. The trunk reads the channel-major window; each of
/// the two heads reads the trunk output and ends in an implicit output layer
/// (64 logits for the shaper, one value otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub trunk: Vec<LayerSpec>,
    pub head: Vec<LayerSpec>,
}

fn conv(kernel: usize, channels: usize) -> LayerSpec {
    LayerSpec::Conv { kernel, channels }
}

fn dense(units: usize) -> LayerSpec {
    LayerSpec::Dense { units, relu: true }
}

impl Architecture {
    /// Six convolutions and four poolings down to a 128-wide feature, with
    /// a 64-unit hidden layer per head.
    pub fn reference() -> Self {
        use LayerSpec::{GlobalAvgPool, Pool};
        Self {
            kind: ModelKind::Shaper,
            trunk: vec![
                conv(5, 8),
                Pool,
                conv(5, 16),
                Pool,
                conv(5, 32),
                Pool,
                conv(3, 64),
                Pool,
                conv(3, 64),
                conv(3, 128),
                GlobalAvgPool,
            ],
            head: vec![dense(64)],
        }
    }

    /// Same trunk as [`Architecture::reference`] with linear regression heads.
    pub fn plain_conv() -> Self {
        Self { kind: ModelKind::PlainConv, head: vec![], ..Self::reference() }
    }

    /// Ten fully connected layers: eight in the trunk, two per head.
    pub fn dense_baseline() -> Self {
        Self { kind: ModelKind::Dense, trunk: vec![dense(128); 8], head: vec![dense(64)] }
    }

    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Shaper => Self::reference(),
            ModelKind::Dense => Self::dense_baseline(),
            ModelKind::PlainConv => Self::plain_conv(),
        }
    }

    /// Small shaper used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            kind: ModelKind::Shaper,
            trunk: vec![conv(5, 4), LayerSpec::Pool, conv(3, 8), LayerSpec::GlobalAvgPool],
            head: vec![dense(8)],
        }
    }

    fn head_outputs(&self) -> usize {
        match self.kind {
            ModelKind::Shaper => N_FILTERS,
            _ => 1,
        }
    }
}

/// Forward-pass intermediates needed by the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    trunk: Vec<Vec<f64>>,
    heads: [Vec<Vec<f64>>; 2],
    masks: [Option<Vec<f64>>; 2],
    /// Softmax per head (shaper only).
    pub probs: [Vec<f64>; 2],
    pub output: [f64; 2],
}

/// A model with its parameters and, for the shaper, the filter bank it mixes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    trunk: Stack,
    heads: [Stack; 2],
    params: Vec<f64>,
    bank: FilterBank,
}

impl Network {
    /// He-initialized network; the shaper's output layers start near zero so
    /// the initial gating is close to uniform.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small_output = net.arch.kind == ModelKind::Shaper;
        let stacks: Vec<&Stack> = std::iter::once(&net.trunk).chain(net.heads.iter()).collect();
        let mut inits = Vec::new();
        for (s, stack) in stacks.iter().enumerate() {
            let last = stack.layers.len() - 1;
            for (i, layer) in stack.layers.iter().enumerate() {
                if layer.weights == 0 {
                    continue;
                }
                let fan_in = layer.weights / layer.output.0;
                let mut std = (2.0 / fan_in as f64).sqrt();
                if s > 0 && i == last && small_output {
                    std *= 0.01;
                }
                inits.push((layer.offset, layer.weights, std));
            }
        }
        for (off, n, std) in inits {
            let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
            for p in &mut net.params[off..off + n] {
                *p = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    /// Network with every parameter zero.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        let mut offset = 0;
        let trunk = Stack::build(&arch.trunk, (CHANNELS, WINDOW_LEN), &mut offset)?;
        let feature = trunk.output();
        let mut head_specs = arch.head.clone();
        head_specs.push(LayerSpec::Dense { units: arch.head_outputs(), relu: false });
        let h0 = Stack::build(&head_specs, feature, &mut offset)?;
        let h1 = Stack::build(&head_specs, feature, &mut offset)?;
        Ok(Self { arch, trunk, heads: [h0, h1], params: vec![0.0; offset], bank: FilterBank::build() })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::LengthMismatch(format!(
                "model has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut FilterBank {
        &mut self.bank
    }

    /// Trunk width feeding the heads.
    pub fn feature_len(&self) -> usize {
        let (c, l) = self.trunk.output();
        c * l
    }

    /// `(name, shape)` of every trainable tensor in storage order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let stacks = [("trunk", &self.trunk), ("head_v", &self.heads[0]), ("head_r", &self.heads[1])];
        for (name, stack) in stacks {
            for (i, layer) in stack.layers.iter().enumerate() {
                if layer.weights > 0 {
                    out.push((format!("{name}.{i}.weight"), layer.weight_shape()));
                    out.push((format!("{name}.{i}.bias"), vec![layer.biases]));
                }
            }
        }
        out
    }

    /// Row `f` of the shaper's output layer for head `h`: `(weight offset,
    /// row width, bias index)`.
    pub fn output_row(&self, head: usize, f: usize) -> (usize, usize, usize) {
        let layer = self.heads[head].layers.last().unwrap();
        let n = layer.input.0 * layer.input.1;
        (layer.offset + f * n, n, layer.offset + layer.weights + f)
    }

    /// Full forward pass on a precomputed input. `dropout` is `(rate, rng)`
    /// in training mode and applies to the head inputs only.
    pub fn forward_raw(
        &self,
        input: &[f64],
        filtered: &[[f64; 2]],
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Trace {
        let mut tr = Trace::default();
        self.trunk.forward(&self.params, input, &mut tr.trunk);
        let feature = tr.trunk.last().unwrap().clone();
        let mut dropout = dropout;
        for h in 0..2 {
            let x = match dropout.as_mut() {
                Some((rate, rng)) if *rate > 0.0 => {
                    let keep = 1.0 - *rate;
                    let mask: Vec<f64> =
                        (0..feature.len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    let x = feature.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    tr.masks[h] = Some(mask);
                    x
                }
                _ => feature.clone(),
            };
            self.heads[h].forward(&self.params, &x, &mut tr.heads[h]);
            let out = tr.heads[h].last().unwrap();
            tr.output[h] = match self.arch.kind {
                ModelKind::Shaper => {
                    let p = softmax(out);
                    let y = p.iter().zip(filtered).map(|(p, f)| p * f[h]).sum();
                    tr.probs[h] = p;
                    y
                }
                _ => out[0],
            };
        }
        tr
    }

    /// Accumulates `∂L/∂params` into `grads` given `∂L/∂output`.
    pub fn backward(&self, tr: &Trace, filtered: &[[f64; 2]], dout: [f64; 2], grads: &mut [f64]) {
        let mut dfeat = vec![0.0; self.feature_len()];
        for h in 0..2 {
            let dlast = match self.arch.kind {
                ModelKind::Shaper => {
                    let y = tr.output[h];
                    tr.probs[h].iter().zip(filtered).map(|(p, f)| dout[h] * p * (f[h] - y)).collect()
                }
                _ => vec![dout[h]],
            };
            let mut dx = self.heads[h].backward(&self.params, grads, &tr.heads[h], dlast);
            if let Some(mask) = &tr.masks[h] {
                dx.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            dfeat.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        self.trunk.backward(&self.params, grads, &tr.trunk, dfeat);
    }

    /// Inference on a window.
    pub fn forward(&self, w: &CommandWindow) -> Trace {
        self.forward_raw(&w.channel_major(), &self.bank.apply(w), None)
    }

    /// Filter probabilities per head; `None` for the regression baselines.
    pub fn gating_forward(&self, w: &CommandWindow) -> Option<[Vec<f64>; 2]> {
        (self.arch.kind == ModelKind::Shaper).then(|| self.forward(w).probs)
    }

    /// Shaped `(v, r)` for a window.
    pub fn shape_command(&self, w: &CommandWindow) -> [f64; 2] {
        self.forward(w).output
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Indices of the `n` largest entries, largest first.
pub fn top_indices(p: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}
