use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::filters::{CommandWindow, CHANNELS, WINDOW_LEN};
use super::train::Sample;
use crate::error::{Error, Result};

const TAPS: usize = CHANNELS * WINDOW_LEN;
/// Relative eigenvalue below which the normal equations count as singular.
const RANK_TOL: f64 = 1e-10;

/// Linear map from a whole window to `(v, r)`: a 2-D convolution kernel the
/// size of the window, shared across time, without bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter {
    /// Per output channel, taps over the channel-major window.
    pub taps: [Vec<f64>; 2],
    /// Ridge strength used when the least-squares problem was rank deficient.
    pub ridge: Option<f64>,
}

impl LinearFilter {
    pub fn apply_raw(&self, input: &[f64]) -> [f64; 2] {
        std::array::from_fn(|c| self.taps[c].iter().zip(input).map(|(a, b)| a * b).sum())
    }

    pub fn apply(&self, w: &CommandWindow) -> [f64; 2] {
        self.apply_raw(&w.channel_major())
    }
}

/// Least-squares taps over the samples, falling back to ridge regression
/// when the window covariance is rank deficient.
pub fn fit_linear_baseline(samples: &[Sample]) -> Result<LinearFilter> {
    if samples.is_empty() {
        return Err(Error::Config("linear baseline needs at least one sample".into()));
    }
    let mut ata = DMatrix::<f64>::zeros(TAPS, TAPS);
    let mut atb = [DVector::<f64>::zeros(TAPS), DVector::<f64>::zeros(TAPS)];
    for s in samples {
        let x = DVector::from_column_slice(&s.input);
        ata.syger(1.0, &x, &x, 1.0);
        for c in 0..CHANNELS {
            atb[c].axpy(s.target[c], &x, 1.0);
        }
    }
    let eig = SymmetricEigen::new(ata.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let ridge = if max <= 0.0 || min <= RANK_TOL * max {
        let lambda = (RANK_TOL * max).max(1e-12);
        warn!("linear baseline: window covariance is rank deficient, ridge {lambda:.3e}");
        for i in 0..TAPS {
            ata[(i, i)] += lambda;
        }
        Some(lambda)
    } else {
        None
    };
    let chol = ata.cholesky().ok_or(Error::Singular(min))?;
    let taps = [chol.solve(&atb[0]).as_slice().to_vec(), chol.solve(&atb[1]).as_slice().to_vec()];
    Ok(LinearFilter { taps, ridge })
}
