//! Augmented random search over Bézier log-weights.
//!
//! Weights are optimized as `θ = ln w`, so every decoded weight is positive.
//! The policy is a constant parameter vector, so there is no observation
//! normalization: each step perturbs `θ` symmetrically along Gaussian
//! directions, keeps the best `top_b` directions and moves along their reward
//! differences scaled by the elite reward spread.

use log::debug;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{GaitParams, WEIGHTS_PER_LEG};
use crate::sim::{CostBreakdown, LegWeights, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArsConfig {
    pub alpha: f64,
    pub n_dirs: usize,
    pub noise: f64,
    pub top_b: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for ArsConfig {
    fn default() -> Self {
        Self { alpha: 0.02, n_dirs: 8, noise: 0.03, top_b: 4, iters: 200, seed: 7 }
    }
}

impl ArsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.top_b && self.top_b <= self.n_dirs) {
            return Err(Error::Config(format!(
                "need 1 ≤ top_b ({}) ≤ n_dirs ({})",
                self.top_b, self.n_dirs
            )));
        }
        if !(self.alpha > 0.0 && self.noise > 0.0) {
            return Err(Error::Config("alpha and noise must be positive".into()));
        }
        Ok(())
    }
}

/// Independent RNG stream for one `(cell, iteration)` pair.
pub fn stream_rng(seed: u64, cell: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((cell << 32) ^ iteration);
    rng
}

/// One evaluated point, kept so callers can track the best seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub theta: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub theta: Vec<f64>,
    /// Every perturbed point evaluated during the step.
    pub evaluated: Vec<Evaluated>,
}

/// One ARS update. `objective` returns a cost; reward is its negation.
pub fn ars_step<F, R>(theta: &[f64], objective: F, cfg: &ArsConfig, rng: &mut R) -> Result<StepOutcome>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let dim = theta.len();
    let mut dirs = Vec::with_capacity(cfg.n_dirs);
    let mut evaluated = Vec::with_capacity(2 * cfg.n_dirs);
    for k in 0..cfg.n_dirs {
        let delta: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut eval = |sign: f64| -> Result<f64> {
            let p: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + sign * cfg.noise * d).collect();
            let c = objective(&p)?;
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("direction {k}, sign {sign:+}: cost {c}")));
            }
            evaluated.push(Evaluated { theta: p, cost: c });
            Ok(-c)
        };
        let plus = eval(1.0)?;
        let minus = eval(-1.0)?;
        dirs.push((plus, minus, delta));
    }
    // stable sort keeps ties in sampling order
    dirs.sort_by(|a, b| b.0.max(b.1).total_cmp(&a.0.max(a.1)));
    let elite = &dirs[..cfg.top_b];
    let rewards: Vec<f64> = elite.iter().flat_map(|(p, m, _)| [*p, *m]).collect();
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rewards.len() as f64;
    let sigma = if var.sqrt() < 1e-9 { 1.0 } else { var.sqrt() };
    let scale = cfg.alpha / (cfg.top_b as f64 * sigma);
    let mut next = theta.to_vec();
    for (plus, minus, delta) in elite {
        for (t, d) in next.iter_mut().zip(delta) {
            *t += scale * (plus - minus) * d;
        }
    }
    Ok(StepOutcome { theta: next, evaluated })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArsRun {
    pub best_theta: Vec<f64>,
    pub best_cost: f64,
    pub initial_cost: f64,
    /// Best cost seen after each iteration.
    pub trace: Vec<f64>,
}

/// Runs `cfg.iters` steps from `theta0`, returning the best point seen.
pub fn minimize<F>(theta0: &[f64], objective: F, cfg: &ArsConfig, cell: u64) -> Result<ArsRun>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let initial_cost = objective(theta0)?;
    if !initial_cost.is_finite() {
        return Err(Error::NonFinite(format!("initial cost {initial_cost}")));
    }
    let mut theta = theta0.to_vec();
    let mut best = Evaluated { theta: theta.clone(), cost: initial_cost };
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let mut rng = stream_rng(cfg.seed, cell, it as u64);
        let step = ars_step(&theta, &objective, cfg, &mut rng)?;
        for e in step.evaluated {
            if e.cost < best.cost {
                best = e;
            }
        }
        theta = step.theta;
        trace.push(best.cost);
        if it % 50 == 0 {
            debug!("cell {cell} iter {it}: best {:.6}", best.cost);
        }
    }
    Ok(ArsRun { best_theta: best.theta, best_cost: best.cost, initial_cost, trace })
}

pub fn decode(theta: &[f64]) -> Result<LegWeights> {
    if theta.len() != 4 * WEIGHTS_PER_LEG {
        return Err(Error::LengthMismatch(format!(
            "expected {} log-weights, got {}",
            4 * WEIGHTS_PER_LEG,
            theta.len()
        )));
    }
    let mut w = [[0.0; WEIGHTS_PER_LEG]; 4];
    for (i, chunk) in theta.chunks(WEIGHTS_PER_LEG).enumerate() {
        for (j, t) in chunk.iter().enumerate() {
            w[i][j] = t.exp();
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGait {
    /// Leg-major log-weights.
    pub theta: Vec<f64>,
    pub cost: CostBreakdown,
    pub initial: CostBreakdown,
    pub trace: Vec<f64>,
}

/// Optimizes the Bézier weights of one gait, starting from uniform weights.
pub fn train_gait(surrogate: &Surrogate, params: &GaitParams, cfg: &ArsConfig, cell: u64) -> Result<TrainedGait> {
    let objective = |theta: &[f64]| -> Result<f64> { Ok(surrogate.rollout_cost(&decode(theta)?, params)?.total) };
    let run = minimize(&vec![0.0; 4 * WEIGHTS_PER_LEG], objective, cfg, cell)?;
    let cost = surrogate.rollout_cost(&decode(&run.best_theta)?, params)?;
    let initial = surrogate.rollout_cost(&decode(&vec![0.0; 4 * WEIGHTS_PER_LEG])?, params)?;
    Ok(TrainedGait { theta: run.best_theta, cost, initial, trace: run.trace })
}
