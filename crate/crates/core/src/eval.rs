//! Comparison tables: trained gaits against their baselines, the shaper
//! against the linear filter on flips, and sample efficiency of the shaper
//! against the dense and plain convolutional networks.

use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::GaitLibrary;
use crate::planner::{GaitDefaults, GaitParams, Radius};
use crate::shaper::demos::flip;
use crate::shaper::{
    fit_linear_baseline, train, windows_from_demos, Architecture, CommandWindow, DemoPair, FilterBank, LinearFilter,
    ManoeuvreConfig, ModelKind, Network, TrainConfig,
};
use crate::sim::{uniform_weights, CostBreakdown, Surrogate};

/// Largest curvature on the default grid, 1/m.
const GRID_CURVATURE: f64 = 2.0;
const GRID_V: (f64, f64) = (0.1, 0.4);

/// `nv` speeds evenly spaced over [0.1, 0.4] m/s and `nr` curvatures evenly
/// spaced over [-2, 2] 1/m (zero curvature is straight).
pub fn grid_axes(nv: usize, nr: usize) -> Result<(Vec<f64>, Vec<Radius>)> {
    if nv == 0 || nr == 0 {
        return Err(Error::Config(format!("grid {nv}x{nr} is empty")));
    }
    let space = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let v = space(nv, GRID_V.0, GRID_V.1);
    let r = space(nr, -GRID_CURVATURE, GRID_CURVATURE)
        .into_iter()
        .map(|k| if k.abs() < 1e-12 { Radius::Straight } else { Radius::Finite(1.0 / k) })
        .collect();
    Ok((v, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitRow {
    pub v: f64,
    pub r: Radius,
    pub uniform: CostBreakdown,
    pub elliptical: CostBreakdown,
    pub trained: CostBreakdown,
}

impl GaitRow {
    /// Relative reduction of J from uniform to trained weights.
    pub fn improvement(&self) -> f64 {
        1.0 - self.trained.total / self.uniform.total
    }

    pub fn attitude_beats_baselines(&self) -> bool {
        let a = self.trained.attitude_penalty();
        a < self.uniform.attitude_penalty() && a < self.elliptical.attitude_penalty()
    }
}

/// Scores every library cell against uniform weights and the elliptical path.
pub fn compare_gaits(lib: &GaitLibrary, surrogate: &Surrogate, gait: &GaitDefaults) -> Result<Vec<GaitRow>> {
    let mut rows = Vec::with_capacity(lib.cells.len());
    for (iv, &v) in lib.v_axis.iter().enumerate() {
        for (ir, &r) in lib.r_axis.iter().enumerate() {
            let params = GaitParams::trot(v, r, gait.cycle_time);
            let cell = lib.cell(iv, ir);
            rows.push(GaitRow {
                v,
                r,
                uniform: surrogate.rollout_cost(&uniform_weights(), &params)?,
                elliptical: surrogate.rollout(&surrogate.elliptical_paths(&params, gait.step_height)?, &params)?,
                trained: surrogate.rollout_cost(&cell.weights()?, &params)?,
            });
        }
    }
    Ok(rows)
}

pub fn gait_table(rows: &[GaitRow]) -> String {
    let mut s = String::from(
        "# columns: v r J_uniform J_elliptical J_trained improvement att_uniform att_elliptical att_trained\n",
    );
    for g in rows {
        let _ = writeln!(
            s,
            "{} {} {:.6} {:.6} {:.6} {:.4} {:.6} {:.6} {:.6}",
            g.v,
            g.r.to_f64(),
            g.uniform.total,
            g.elliptical.total,
            g.trained.total,
            g.improvement(),
            g.uniform.attitude_penalty(),
            g.elliptical.attitude_penalty(),
            g.trained.attitude_penalty()
        );
    }
    s
}

/// Runs a model over a whole series, one window per sample.
pub fn shape_series(net: &Network, series: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    (0..series.len()).map(|k| Ok(net.shape_command(&CommandWindow::ending_at(series, k)?))).collect()
}

pub fn filter_series(filter: &LinearFilter, series: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    (0..series.len()).map(|k| Ok(filter.apply(&CommandWindow::ending_at(series, k)?))).collect()
}

/// Signed deviation of velocity from `steady` with the largest magnitude at
/// or after `onset`.
pub fn excursion(series: &[[f64; 2]], onset: usize, steady: f64) -> f64 {
    series[onset.min(series.len())..]
        .iter()
        .map(|x| x[0] - steady)
        .fold(0.0, |best, d| if d.abs() > best.abs() { d } else { best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipResponse {
    pub label: String,
    pub expert_excursion: f64,
    pub linear_excursion: f64,
    pub shaper_excursion: f64,
    pub shaper_min_v: f64,
}

/// Least-squares filter fitted to the unmirrored flip alone, every window.
pub fn fit_flip_filter(cfg: &ManoeuvreConfig) -> Result<LinearFilter> {
    let demo = flip(cfg, 1.0)?;
    fit_linear_baseline(&windows_from_demos(&[demo], &FilterBank::build(), 1)?)
}

/// Velocity response of the expert, the linear filter and the shaper on both
/// flip directions. Steady velocity is full stick.
pub fn compare_filters(shaper: &Network, filter: &LinearFilter, cfg: &ManoeuvreConfig) -> Result<Vec<FlipResponse>> {
    [1.0, -1.0]
        .into_iter()
        .map(|sign| {
            let demo = flip(cfg, sign)?;
            let shaped = shape_series(shaper, &demo.novice)?;
            let linear = filter_series(filter, &demo.novice)?;
            Ok(FlipResponse {
                label: demo.label.clone(),
                expert_excursion: excursion(&demo.expert, cfg.onset, 1.0),
                linear_excursion: excursion(&linear, cfg.onset, 1.0),
                shaper_excursion: excursion(&shaped, cfg.onset, 1.0),
                shaper_min_v: shaped[cfg.onset..].iter().map(|x| x[0]).fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

pub fn filter_table(rows: &[FlipResponse]) -> String {
    let mut s = String::from("# columns: demo expert_excursion linear_excursion shaper_excursion shaper_min_v\n");
    for f in rows {
        let _ = writeln!(
            s,
            "{} {:.6} {:.6} {:.6} {:.6}",
            f.label, f.expert_excursion, f.linear_excursion, f.shaper_excursion, f.shaper_min_v
        );
    }
    s
}

/// Sample-efficiency protocol: every model trains for the same number of
/// epochs on the first `n` demos and is scored on the demos after the
/// largest training size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub sizes: Vec<usize>,
    pub epochs: usize,
    pub val_stride: usize,
    pub kinds: Vec<ModelKind>,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        Self {
            sizes: vec![5, 10, 20],
            epochs: 20,
            val_stride: 5,
            kinds: vec![ModelKind::Shaper, ModelKind::Dense, ModelKind::PlainConv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub kind: ModelKind,
    pub n_train: usize,
    pub best_epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub struct EfficiencyRun {
    pub rows: Vec<EfficiencyRow>,
    /// Trained models in row order.
    pub models: Vec<Network>,
}

pub fn sample_efficiency(demos: &[DemoPair], cfg: &EfficiencyConfig, train_cfg: &TrainConfig) -> Result<EfficiencyRun> {
    let largest = cfg.sizes.iter().copied().max().ok_or_else(|| Error::Config("no training sizes".into()))?;
    if largest >= demos.len() || cfg.sizes.contains(&0) {
        return Err(Error::Config(format!(
            "training sizes {:?} need 1..{} of {} demos",
            cfg.sizes,
            demos.len() - 1,
            demos.len()
        )));
    }
    let bank = FilterBank::build();
    let val = windows_from_demos(&demos[largest..], &bank, cfg.val_stride)?;
    let run_cfg = TrainConfig { max_epochs: cfg.epochs, stop_val_loss: 0.0, ..train_cfg.clone() };
    let mut out = EfficiencyRun { rows: Vec::new(), models: Vec::new() };
    for &n in &cfg.sizes {
        let tr = windows_from_demos(&demos[..n], &bank, train_cfg.window_stride)?;
        for &kind in &cfg.kinds {
            let net = Network::new(Architecture::for_kind(kind), train_cfg.seed)?;
            let outcome = train(net, &tr, &val, &run_cfg)?;
            let best = outcome.best();
            info!("{} on {n} demos: train {:.3e} val {:.3e}", kind.name(), best.train_loss, best.val_loss);
            out.rows.push(EfficiencyRow {
                kind,
                n_train: n,
                best_epoch: best.epoch,
                train_loss: best.train_loss,
                val_loss: best.val_loss,
            });
            out.models.push(outcome.net);
        }
    }
    Ok(out)
}

pub fn efficiency_table(rows: &[EfficiencyRow]) -> String {
    let mut s = String::from("# columns: model n_train best_epoch train_mse val_mse\n");
    for r in rows {
        let _ = writeln!(s, "{} {} {} {:.6e} {:.6e}", r.kind.name(), r.n_train, r.best_epoch, r.train_loss, r.val_loss);
    }
    s
}
