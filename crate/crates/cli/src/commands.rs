use std::fmt::Write as _;
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use quadshape::eval::{self, EfficiencyConfig};
use quadshape::kinematics;
use quadshape::library::train_library;
use quadshape::planner::{local_phase, FootPath};
use quadshape::shaper::demos::{read_demos, write_demos};
use quadshape::shaper::model::model_to_bytes;
use quadshape::shaper::train::TrainOutcome;
use quadshape::shaper::{
    augment as augment_demos, load_model, synth_demo_suite, train, windows_from_demos, Architecture, FilterBank,
    ModelKind, Network, TrainConfig,
};
use quadshape::teleop::{replay_demo, replay_to_text, server};
use quadshape::{
    Config, DemoPair, FootTrajectory, GaitLibrary, GaitParams, LegId, Radius, SessionAssets, Surrogate,
};

use crate::output::{emit, header, read_text, write_file};
use crate::{Augment, BaselineKind, Compare, Eval, GenTraj, Replay, Serve, SynthDemos, TrainBaselines, TrainData,
    TrainGaits, TrainShaper};

pub fn gen_traj(cfg: &Config, inv: &str, a: GenTraj) -> Result<()> {
    if a.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let r = match a.r {
        Some(r) => Radius::Finite(r),
        None => Radius::Straight,
    };
    let params = GaitParams::trot(a.v, r, cfg.gait.cycle_time);
    params.validate(&cfg.gait)?;
    let library = a.library.as_deref().map(GaitLibrary::load).transpose()?;
    let weights = match &library {
        Some(lib) => {
            let cell = lib.lookup(a.v, r);
            if !cell.trained {
                warn!("nearest library cell failed to train; its weights are uniform");
            }
            Some(cell.weights()?)
        }
        None => None,
    };
    let mut out = header("trajectory", inv);
    let _ = writeln!(out, "# v: {} r: {}", a.v, r.to_f64());
    out.push_str("# columns: leg phase x y z theta1 theta2 abduction step_length phi\n");
    for leg in LegId::ALL {
        let mut path = FootTrajectory::plan(&params, leg, &cfg.chassis)?;
        if let Some(w) = &weights {
            path = path.with_weights(&w[leg.index()])?;
        }
        for k in 0..a.samples {
            let phase = k as f64 / a.samples as f64;
            let p = path.position(local_phase(&params, phase, leg));
            let j = kinematics::inverse(&cfg.links, &p, None)?;
            let _ = writeln!(
                out,
                "{} {phase} {} {} {} {} {} {} {} {}",
                leg.name(),
                p.x,
                p.y,
                p.z,
                j.theta1,
                j.theta2,
                j.abduction,
                path.sl,
                path.phi
            );
        }
    }
    emit(a.output.as_deref(), &out)
}

pub fn train_gaits(cfg: &Config, inv: &str, a: TrainGaits) -> Result<()> {
    let mut ars = cfg.ars;
    if let Some(seed) = a.seed {
        ars.seed = seed;
    }
    if let Some(iters) = a.iters {
        ars.iters = iters;
    }
    let (v_axis, r_axis) = eval::grid_axes(a.grid.0, a.grid.1)?;
    let surrogate = Surrogate::from_config(cfg);
    let lib = train_library(&v_axis, &r_axis, &surrogate, &cfg.gait, &ars, inv)?;
    if lib.is_partial() {
        warn!("library is partial: some cells failed to train");
    }
    for (iv, v) in v_axis.iter().enumerate() {
        for (ir, r) in r_axis.iter().enumerate() {
            info!("v = {v}, r = {}: J = {:.5}", r.to_f64(), lib.cell(iv, ir).cost);
        }
    }
    write_file(&a.output, &lib.to_bytes())
}

pub fn synth_demos(cfg: &Config, inv: &str, a: SynthDemos) -> Result<()> {
    let mut m = cfg.demos;
    m.mirrored &= !a.no_mirror;
    write_file(&a.output, write_demos(&synth_demo_suite(&m)?, inv).as_bytes())
}

fn load_demos(path: &Path) -> Result<Vec<DemoPair>> {
    read_demos(&read_text(path)?).with_context(|| format!("reading demos from {}", path.display()))
}

pub fn augment(inv: &str, a: Augment) -> Result<()> {
    let demos = load_demos(&a.input)?;
    write_file(&a.output, write_demos(&augment_demos(&demos, a.count, a.seed)?, inv).as_bytes())
}

fn train_config(cfg: &Config, d: &TrainData) -> TrainConfig {
    let mut t = cfg.shaper;
    if let Some(seed) = d.seed {
        t.seed = seed;
    }
    if let Some(e) = d.epochs {
        t.max_epochs = e;
    }
    if let Some(v) = d.target {
        t.stop_val_loss = v;
    }
    t
}

/// Trains one model on the first `d.train` demos and validates on the rest.
fn fit(cfg: &Config, d: &TrainData, kind: ModelKind) -> Result<TrainOutcome> {
    let demos = load_demos(&d.demos)?;
    if d.train == 0 || d.train >= demos.len() {
        bail!("--train {} needs between 1 and {} of the {} demos", d.train, demos.len() - 1, demos.len());
    }
    let tc = train_config(cfg, d);
    let bank = FilterBank::build();
    let tr = windows_from_demos(&demos[..d.train], &bank, tc.window_stride)?;
    let val = windows_from_demos(&demos[d.train..], &bank, cfg.efficiency.val_stride)?;
    info!("{}: {} training and {} validation windows", kind.name(), tr.len(), val.len());
    let outcome = train(Network::new(Architecture::for_kind(kind), tc.seed)?, &tr, &val, &tc)?;
    let best = outcome.best();
    info!(
        "{}: best epoch {} train {:.4e} val {:.4e}{}",
        kind.name(),
        best.epoch,
        best.train_loss,
        best.val_loss,
        if outcome.reached_target { "" } else { " (target not reached)" }
    );
    Ok(outcome)
}

fn curve_text(o: &TrainOutcome, kind: ModelKind, inv: &str) -> String {
    let mut s = header("curve", inv);
    let _ = writeln!(s, "# model: {}", kind.name());
    s.push_str("# columns: epoch train_mse val_mse\n");
    for e in &o.curve {
        let _ = writeln!(s, "{} {:e} {:e}", e.epoch, e.train_loss, e.val_loss);
    }
    s
}

pub fn train_shaper(cfg: &Config, inv: &str, a: TrainShaper) -> Result<()> {
    let o = fit(cfg, &a.data, ModelKind::Shaper)?;
    write_file(&a.output, &model_to_bytes(&o.net, inv)?)?;
    if let Some(c) = &a.curve {
        write_file(c, curve_text(&o, ModelKind::Shaper, inv).as_bytes())?;
    }
    Ok(())
}

pub fn train_baselines(cfg: &Config, inv: &str, a: TrainBaselines) -> Result<()> {
    let kinds: &[ModelKind] = match a.kind {
        BaselineKind::Dense => &[ModelKind::Dense],
        BaselineKind::PlainConv => &[ModelKind::PlainConv],
        BaselineKind::All => &[ModelKind::Dense, ModelKind::PlainConv],
    };
    for &kind in kinds {
        let o = fit(cfg, &a.data, kind)?;
        write_file(&a.out_dir.join(format!("{}.qsnn", kind.name())), &model_to_bytes(&o.net, inv)?)?;
        write_file(&a.out_dir.join(format!("{}_curve.txt", kind.name())), curve_text(&o, kind, inv).as_bytes())?;
    }
    Ok(())
}

fn load_shaper(path: &Path) -> Result<Network> {
    let (net, _) = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    Ok(net)
}

pub fn eval(cfg: &Config, inv: &str, a: Eval) -> Result<()> {
    let mut out = header(
        match a.compare {
            Compare::Gaits => "eval-gaits",
            Compare::Filters => "eval-filters",
            Compare::Baselines => "eval-baselines",
        },
        inv,
    );
    match a.compare {
        Compare::Gaits => {
            let lib = GaitLibrary::load(a.library.as_deref().expect("required by clap"))?;
            let rows = eval::compare_gaits(&lib, &Surrogate::from_config(cfg), &cfg.gait)?;
            out.push_str(&eval::gait_table(&rows));
        }
        Compare::Filters => {
            let net = load_shaper(a.model.as_deref().expect("required by clap"))?;
            let filter = eval::fit_flip_filter(&cfg.demos)?;
            if let Some(l) = filter.ridge {
                let _ = writeln!(out, "# linear filter ridge: {l:e}");
            }
            out.push_str(&eval::filter_table(&eval::compare_filters(&net, &filter, &cfg.demos)?));
        }
        Compare::Baselines => {
            let demos = load_demos(a.demos.as_deref().expect("required by clap"))?;
            let mut tc = cfg.shaper;
            if let Some(seed) = a.seed {
                tc.seed = seed;
            }
            let ec: &EfficiencyConfig = &cfg.efficiency;
            let _ = writeln!(out, "# epochs: {} sizes: {:?}", ec.epochs, ec.sizes);
            out.push_str(&eval::efficiency_table(&eval::sample_efficiency(&demos, ec, &tc)?.rows));
        }
    }
    emit(a.output.as_deref(), &out)
}

fn assets(cfg: &Config, model: &Path, library: Option<&Path>) -> Result<SessionAssets> {
    let mut assets = SessionAssets::new(load_shaper(model)?);
    assets.library = library.map(GaitLibrary::load).transpose()?.map(Arc::new);
    assets.geom = cfg.chassis;
    assets.gait = cfg.gait;
    Ok(assets)
}

pub fn replay(cfg: &Config, inv: &str, a: Replay) -> Result<()> {
    let demos = load_demos(&a.demos)?;
    let demo = match a.demo.parse::<usize>() {
        Ok(i) => demos.get(i).with_context(|| format!("demo index {i} out of range ({} demos)", demos.len()))?,
        Err(_) => demos
            .iter()
            .find(|d| d.label == a.demo)
            .with_context(|| format!("no demo labelled {:?}", a.demo))?,
    };
    let assets = assets(cfg, &a.model, None)?;
    let rows = replay_demo(demo, &assets, a.mode.into());
    let mut head = header("replay", inv);
    let _ = writeln!(head, "# demo: {}", demo.label);
    emit(a.output.as_deref(), &replay_to_text(&rows, &head))
}

pub fn serve(cfg: &Config, a: Serve) -> Result<()> {
    let assets = assets(cfg, &a.model, a.library.as_deref())?;
    let listener = TcpListener::bind((a.host.as_str(), a.port)).with_context(|| format!("binding {}:{}", a.host, a.port))?;
    if a.websocket {
        crate::ws::serve(listener, assets, a.mode.into())
    } else {
        Ok(server::serve(listener, assets, a.mode.into())?)
    }
}
