//! Minimal 1-D convolutional and dense layers over a flat parameter vector,
//! with hand-written reverse-mode gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid convolution with stride 1 followed by ReLU.
    Conv { kernel: usize, channels: usize },
    /// Max pooling over non-overlapping pairs.
    Pool,
    GlobalAvgPool,
    Dense { units: usize, relu: bool },
}

/// `(channels, length)`; dense activations are `(units, 1)`.
pub type Shape = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    /// Offset of the weights in the flat parameter vector; biases follow.
    pub offset: usize,
    pub weights: usize,
    pub biases: usize,
}

impl Layer {
    pub fn params(&self) -> usize {
        self.weights + self.biases
    }

    /// Shape of the weight tensor as stored.
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.spec {
            LayerSpec::Conv { kernel, channels } => vec![channels, self.input.0, kernel],
            LayerSpec::Dense { units, .. } => vec![units, self.input.0 * self.input.1],
            _ => vec![],
        }
    }
}

/// A feed-forward chain of layers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stack {
    pub layers: Vec<Layer>,
    pub input: Shape,
}

impl Stack {
    /// Lays the stack out in the parameter vector starting at `offset`, which
    /// is advanced past it.
    pub fn build(specs: &[LayerSpec], input: Shape, offset: &mut usize) -> Result<Self> {
        let mut shape = input;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, &spec) in specs.iter().enumerate() {
            let (c, l) = shape;
            let (output, weights, biases) = match spec {
                LayerSpec::Conv { kernel, channels } => {
                    if kernel == 0 || channels == 0 || kernel > l {
                        return Err(Error::Config(format!("layer {i}: conv k={kernel} on length {l}")));
                    }
                    ((channels, l - kernel + 1), channels * c * kernel, channels)
                }
                LayerSpec::Pool => {
                    if l < 2 {
                        return Err(Error::Config(format!("layer {i}: pool on length {l}")));
                    }
                    ((c, l / 2), 0, 0)
                }
                LayerSpec::GlobalAvgPool => ((c, 1), 0, 0),
                LayerSpec::Dense { units, .. } => {
                    if units == 0 {
                        return Err(Error::Config(format!("layer {i}: dense with no units")));
                    }
                    ((units, 1), units * c * l, units)
                }
            };
            layers.push(Layer { spec, input: shape, output, offset: *offset, weights, biases });
            *offset += weights + biases;
            shape = output;
        }
        Ok(Self { layers, input })
    }

    pub fn output(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    /// Forward pass. `acts` receives the input followed by every layer output.
    pub fn forward(&self, params: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        for layer in &self.layers {
            let out = forward_layer(layer, params, acts.last().unwrap());
            acts.push(out);
        }
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the stack input.
    pub fn backward(&self, params: &[f64], grads: &mut [f64], acts: &[Vec<f64>], dout: Vec<f64>) -> Vec<f64> {
        let mut d = dout;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            d = backward_layer(layer, params, grads, &acts[i], &acts[i + 1], d);
        }
        d
    }
}

fn forward_layer(layer: &Layer, p: &[f64], x: &[f64]) -> Vec<f64> {
    let (c, l) = layer.input;
    let (oc, ol) = layer.output;
    match layer.spec {
        LayerSpec::Conv { kernel: k, .. } => {
            let w = &p[layer.offset..layer.offset + layer.weights];
            let b = &p[layer.offset + layer.weights..layer.offset + layer.params()];
            let mut out = vec![0.0; oc * ol];
            for o in 0..oc {
                let row = &mut out[o * ol..(o + 1) * ol];
                row.fill(b[o]);
                for i in 0..c {
                    let xi = &x[i * l..(i + 1) * l];
                    for (j, &wk) in w[(o * c + i) * k..(o * c + i + 1) * k].iter().enumerate() {
                        for (r, xv) in row.iter_mut().zip(&xi[j..j + ol]) {
                            *r += wk * xv;
                        }
                    }
                }
                row.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            out
        }
        LayerSpec::Pool => {
            let mut out = vec![0.0; oc * ol];
            for ch in 0..c {
                for t in 0..ol {
                    out[ch * ol + t] = x[ch * l + 2 * t].max(x[ch * l + 2 * t + 1]);
                }
            }
            out
        }
        LayerSpec::GlobalAvgPool => (0..c).map(|ch| x[ch * l..(ch + 1) * l].iter().sum::<f64>() / l as f64).collect(),
        LayerSpec::Dense { units, relu } => {
            let n = c * l;
            let w = &p[layer.offset..layer.offset + layer.weights];
            let b = &p[layer.offset + layer.weights..layer.offset + layer.params()];
            (0..units)
                .map(|j| {
                    let z = b[j] + w[j * n..(j + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    if relu {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect()
        }
    }
}

fn backward_layer(layer: &Layer, p: &[f64], g: &mut [f64], x: &[f64], y: &[f64], mut dy: Vec<f64>) -> Vec<f64> {
    let (c, l) = layer.input;
    let (oc, ol) = layer.output;
    match layer.spec {
        LayerSpec::Conv { kernel: k, .. } => {
            for (d, &v) in dy.iter_mut().zip(y) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            let (woff, boff) = (layer.offset, layer.offset + layer.weights);
            let mut dx = vec![0.0; c * l];
            for o in 0..oc {
                let dro = &dy[o * ol..(o + 1) * ol];
                g[boff + o] += dro.iter().sum::<f64>();
                for i in 0..c {
                    let xi = &x[i * l..(i + 1) * l];
                    let dxi = &mut dx[i * l..(i + 1) * l];
                    for j in 0..k {
                        let widx = woff + (o * c + i) * k + j;
                        let wk = p[widx];
                        let mut acc = 0.0;
                        for ((d, xv), dxv) in dro.iter().zip(&xi[j..j + ol]).zip(&mut dxi[j..j + ol]) {
                            acc += d * xv;
                            *dxv += wk * d;
                        }
                        g[widx] += acc;
                    }
                }
            }
            dx
        }
        LayerSpec::Pool => {
            let mut dx = vec![0.0; c * l];
            for ch in 0..c {
                for t in 0..ol {
                    let (a, b) = (ch * l + 2 * t, ch * l + 2 * t + 1);
                    let arg = if x[a] >= x[b] { a } else { b };
                    dx[arg] += dy[ch * ol + t];
                }
            }
            dx
        }
        LayerSpec::GlobalAvgPool => {
            let mut dx = vec![0.0; c * l];
            for ch in 0..c {
                let v = dy[ch] / l as f64;
                dx[ch * l..(ch + 1) * l].fill(v);
            }
            dx
        }
        LayerSpec::Dense { units, relu } => {
            if relu {
                for (d, &v) in dy.iter_mut().zip(y) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let n = c * l;
            let (woff, boff) = (layer.offset, layer.offset + layer.weights);
            let mut dx = vec![0.0; n];
            for j in 0..units {
                let d = dy[j];
                if d == 0.0 {
                    continue;
                }
                g[boff + j] += d;
                let row = woff + j * n;
                for i in 0..n {
                    g[row + i] += d * x[i];
                    dx[i] += d * p[row + i];
                }
            }
            dx
        }
    }
}
