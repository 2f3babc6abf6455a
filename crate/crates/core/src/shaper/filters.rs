use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per command window (1.25 s at 200 Hz).
pub const WINDOW_LEN: usize = 250;
/// Command rate, Hz.
pub const SAMPLE_RATE: f64 = 200.0;
pub const CHANNELS: usize = 2;
pub const N_FILTERS: usize = 64;

/// The last [`WINDOW_LEN`] `(v, r)` samples, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandWindow {
    samples: Vec<[f64; 2]>,
}

impl CommandWindow {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.len() != WINDOW_LEN {
            return Err(Error::LengthMismatch(format!(
                "window needs {WINDOW_LEN} samples, got {}",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|s| !s.iter().all(|x| (-1.0..=1.0).contains(x))) {
            return Err(Error::Config(format!("window sample {k} outside [-1, 1]: {:?}", samples[k])));
        }
        Ok(Self { samples })
    }

    pub fn zeros() -> Self {
        Self { samples: vec![[0.0; 2]; WINDOW_LEN] }
    }

    /// Window ending at index `end` of `series`, left-padded with the first
    /// sample when the series is too short.
    pub fn ending_at(series: &[[f64; 2]], end: usize) -> Result<Self> {
        if end >= series.len() {
            return Err(Error::LengthMismatch(format!("window end {end} past series of {}", series.len())));
        }
        let first = series[0];
        let samples = (0..WINDOW_LEN)
            .map(|i| {
                let back = WINDOW_LEN - 1 - i;
                if back > end {
                    first
                } else {
                    series[end - back]
                }
            })
            .collect();
        Self::new(samples)
    }

    /// Drops the oldest sample and appends `sample`.
    pub fn push(&mut self, sample: [f64; 2]) {
        self.samples.rotate_left(1);
        self.samples[WINDOW_LEN - 1] = sample;
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn latest(&self) -> [f64; 2] {
        self.samples[WINDOW_LEN - 1]
    }

    /// Channel-major copy: all `v` then all `r`.
    pub fn channel_major(&self) -> Vec<f64> {
        (0..CHANNELS).flat_map(|c| self.samples.iter().map(move |s| s[c])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterSpec {
    /// Mean of the last `n` samples.
    MovingAverage(usize),
    /// `k` times the latest sample.
    Scale(f64),
}

impl FilterSpec {
    pub fn apply(&self, w: &CommandWindow, channel: usize) -> f64 {
        match *self {
            Self::MovingAverage(n) => {
                w.samples[WINDOW_LEN - n..].iter().map(|s| s[channel]).sum::<f64>() / n as f64
            }
            Self::Scale(k) => k * w.latest()[channel],
        }
    }
}

/// Fixed, non-trainable filters mixed by the gating network.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    specs: Vec<FilterSpec>,
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::build()
    }
}

impl FilterBank {
    /// Moving averages over 1..=8 then 10, 20, ..., 240 samples, followed by
    /// scales 0.9^1 ..= 0.9^32.
    pub fn build() -> Self {
        let windows = (1..=8).chain((1..=24).map(|i| 10 * i));
        let scales = (1..=32).map(|j| FilterSpec::Scale(0.9f64.powi(j)));
        Self { specs: windows.map(FilterSpec::MovingAverage).chain(scales).collect() }
    }

    pub fn from_specs(specs: Vec<FilterSpec>) -> Result<Self> {
        if specs.len() != N_FILTERS {
            return Err(Error::Config(format!("filter bank needs {N_FILTERS} filters, got {}", specs.len())));
        }
        for s in &specs {
            match *s {
                FilterSpec::MovingAverage(n) if n == 0 || n > WINDOW_LEN => {
                    return Err(Error::Config(format!("moving average window {n} outside 1..={WINDOW_LEN}")))
                }
                FilterSpec::Scale(k) if !k.is_finite() => return Err(Error::Config("non-finite scale".into())),
                _ => {}
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[FilterSpec] {
        &self.specs
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.specs.swap(a, b);
    }

    /// Filtered values, one row per filter: `out[f] = [v, r]`.
    pub fn apply(&self, w: &CommandWindow) -> Vec<[f64; 2]> {
        // prefix sums from the newest sample backwards keep every moving average O(1)
        let mut tail = vec![[0.0; 2]; WINDOW_LEN + 1];
        for i in 0..WINDOW_LEN {
            let s = w.samples[WINDOW_LEN - 1 - i];
            tail[i + 1] = [tail[i][0] + s[0], tail[i][1] + s[1]];
        }
        let latest = w.latest();
        self.specs
            .iter()
            .map(|spec| match *spec {
                FilterSpec::MovingAverage(n) => [tail[n][0] / n as f64, tail[n][1] / n as f64],
                FilterSpec::Scale(k) => [k * latest[0], k * latest[1]],
            })
            .collect()
    }
}
