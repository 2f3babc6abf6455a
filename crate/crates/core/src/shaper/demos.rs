//! Scripted novice/expert demonstrations, augmentation, and the demo file
//! format.
//!
//! The text format is one header block followed by one block per demo:
//!
//! ```text
//! # quadshape-demos 1
//! # invocation: <command line>
//! # rate_hz: 200
//! # columns: t v_novice r_novice v_expert r_expert
//! # demo <label> <samples>
//! 0 0 0 0 0
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so reloading is exact.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filters::{SAMPLE_RATE, WINDOW_LEN};
use crate::error::{Error, Result};

pub const DEMO_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# quadshape-demos";

#[derive(Debug, Clone, PartialEq)]
pub struct DemoPair {
    pub novice: Vec<[f64; 2]>,
    pub expert: Vec<[f64; 2]>,
    pub label: String,
}

impl DemoPair {
    pub fn new(novice: Vec<[f64; 2]>, expert: Vec<[f64; 2]>, label: impl Into<String>) -> Result<Self> {
        if novice.len() != expert.len() || novice.len() < WINDOW_LEN {
            return Err(Error::LengthMismatch(format!(
                "demo needs equal series of at least {WINDOW_LEN} samples, got {} and {}",
                novice.len(),
                expert.len()
            )));
        }
        let bad = novice.iter().chain(&expert).flatten().find(|x| !(-1.0..=1.0).contains(*x));
        if let Some(x) = bad {
            return Err(Error::Config(format!("demo value {x} outside [-1, 1]")));
        }
        Ok(Self { novice, expert, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.novice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.novice.is_empty()
    }
}

/// Timing of the scripted manoeuvres, in samples at 200 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManoeuvreConfig {
    pub samples: usize,
    /// Sample at which the novice moves the stick.
    pub onset: usize,
    /// Expert velocity ramp when setting off.
    pub accel_ramp: usize,
    /// Expert radius ramp when halting.
    pub halt_ramp: usize,
    /// Expert velocity decay constant when halting.
    pub halt_tau: f64,
    /// Expert radius ramp through zero on a flip.
    pub flip_ramp: usize,
    /// Expert velocity at the radius zero crossing.
    pub flip_dip: f64,
    /// Also emit each manoeuvre with the radius negated.
    pub mirrored: bool,
}

impl Default for ManoeuvreConfig {
    fn default() -> Self {
        Self {
            samples: 800,
            onset: 250,
            accel_ramp: 200,
            halt_ramp: 200,
            halt_tau: 60.0,
            flip_ramp: 160,
            flip_dip: 0.4,
            mirrored: true,
        }
    }
}

impl ManoeuvreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < WINDOW_LEN || self.onset >= self.samples {
            return Err(Error::Config(format!("demo of {} samples with onset {}", self.samples, self.onset)));
        }
        if self.accel_ramp == 0 || self.halt_ramp == 0 || self.flip_ramp == 0 || !(self.halt_tau > 0.0) {
            return Err(Error::Config("manoeuvre ramps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_dip) {
            return Err(Error::Config(format!("flip dip {} outside [0, 1]", self.flip_dip)));
        }
        Ok(())
    }
}

/// Fraction of a ramp of `len` samples completed at sample `k`; the first
/// step after the onset already counts.
fn ramp(k: usize, onset: usize, len: usize) -> f64 {
    if k < onset {
        0.0
    } else {
        ((k - onset + 1) as f64 / len as f64).min(1.0)
    }
}

/// Set off: both sticks step to full; the expert keeps the radius step but
/// ramps the velocity.
pub fn accelerate(cfg: &ManoeuvreConfig, sign: f64) -> Result<DemoPair> {
    let t0 = cfg.onset;
    let novice = (0..cfg.samples).map(|k| if k < t0 { [0.0, 0.0] } else { [1.0, sign] }).collect();
    let expert = (0..cfg.samples)
        .map(|k| [ramp(k, t0, cfg.accel_ramp), if k < t0 { 0.0 } else { sign }])
        .collect();
    DemoPair::new(novice, expert, if sign > 0.0 { "accelerate" } else { "accelerate-mirrored" })
}

/// Halt: both sticks drop to zero; the expert unwinds the radius linearly and
/// lets the velocity decay exponentially.
pub fn halt(cfg: &ManoeuvreConfig, sign: f64) -> Result<DemoPair> {
    let t0 = cfg.onset;
    let novice = (0..cfg.samples).map(|k| if k < t0 { [1.0, sign] } else { [0.0, 0.0] }).collect();
    let expert = (0..cfg.samples)
        .map(|k| {
            if k < t0 {
                [1.0, sign]
            } else {
                let v = (-((k - t0 + 1) as f64) / cfg.halt_tau).exp();
                [v, sign * (1.0 - ramp(k, t0, cfg.halt_ramp))]
            }
        })
        .collect();
    DemoPair::new(novice, expert, if sign > 0.0 { "halt" } else { "halt-mirrored" })
}

/// Flip: at full speed the radius stick jumps from `-sign` to `+sign`; the
/// expert sweeps the radius through zero and dips the velocity with a raised
/// cosine that bottoms out at the zero crossing.
pub fn flip(cfg: &ManoeuvreConfig, sign: f64) -> Result<DemoPair> {
    let t0 = cfg.onset;
    let novice = (0..cfg.samples).map(|k| [1.0, if k < t0 { -sign } else { sign }]).collect();
    let expert = (0..cfg.samples)
        .map(|k| {
            let u = ramp(k, t0, cfg.flip_ramp);
            let dip = (1.0 - cfg.flip_dip) * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
            [1.0 - dip, sign * (2.0 * u - 1.0)]
        })
        .collect();
    DemoPair::new(novice, expert, if sign > 0.0 { "flip" } else { "flip-mirrored" })
}

/// Accelerate, halt and flip, followed by their mirrored versions when
/// enabled.
pub fn synth_demo_suite(cfg: &ManoeuvreConfig) -> Result<Vec<DemoPair>> {
    cfg.validate()?;
    let mut out = vec![accelerate(cfg, 1.0)?, halt(cfg, 1.0)?, flip(cfg, 1.0)?];
    if cfg.mirrored {
        out.extend([accelerate(cfg, -1.0)?, halt(cfg, -1.0)?, flip(cfg, -1.0)?]);
    }
    Ok(out)
}

/// Delays both series by `delay` samples (holding the first sample) and
/// scales them, clipping to [-1, 1].
pub fn augment_one(demo: &DemoPair, delay: usize, scale: f64) -> DemoPair {
    let mut clipped = false;
    let mut shift = |s: &[[f64; 2]]| -> Vec<[f64; 2]> {
        (0..s.len())
            .map(|k| {
                let src = s[k.saturating_sub(delay)];
                src.map(|x| {
                    let y = x * scale;
                    if y.abs() > 1.0 {
                        clipped = true;
                    }
                    y.clamp(-1.0, 1.0)
                })
            })
            .collect()
    };
    let novice = shift(&demo.novice);
    let expert = shift(&demo.expert);
    if clipped {
        warn!("scale {scale} pushed {} outside [-1, 1]; clipped", demo.label);
    }
    DemoPair { novice, expert, label: format!("{}+d{delay}x{scale:.4}", demo.label) }
}

/// `n_out` clones of the demos cycled in order, each with a random delay in
/// 0..=100 samples and scale in [0.5, 1].
pub fn augment(demos: &[DemoPair], n_out: usize, seed: u64) -> Result<Vec<DemoPair>> {
    if demos.is_empty() || n_out < demos.len() {
        return Err(Error::Config(format!("cannot make {n_out} clones of {} demos", demos.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_out)
        .map(|i| {
            let delay = rng.random_range(0..=100usize);
            let scale = rng.random_range(0.5..=1.0);
            augment_one(&demos[i % demos.len()], delay, scale)
        })
        .collect())
}

pub fn write_demos(demos: &[DemoPair], invocation: &str) -> String {
    let mut s = format!(
        "{MAGIC} {DEMO_FORMAT_VERSION}\n# invocation: {invocation}\n# rate_hz: {SAMPLE_RATE}\n# columns: t v_novice r_novice v_expert r_expert\n"
    );
    for d in demos {
        s.push_str(&format!("# demo {} {}\n", d.label, d.len()));
        for (k, (n, e)) in d.novice.iter().zip(&d.expert).enumerate() {
            s.push_str(&format!("{} {} {} {} {}\n", k as f64 / SAMPLE_RATE, n[0], n[1], e[0], e[1]));
        }
    }
    s
}

pub fn read_demos(text: &str) -> Result<Vec<DemoPair>> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Format("empty demo file".into()))?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::Format("missing demo file header".into()))?;
    if version != DEMO_FORMAT_VERSION {
        return Err(Error::Format(format!("demo format version {version}, expected {DEMO_FORMAT_VERSION}")));
    }
    let mut demos = Vec::new();
    let mut current: Option<(String, usize, Vec<[f64; 2]>, Vec<[f64; 2]>)> = None;
    let finish = |cur: Option<(String, usize, Vec<[f64; 2]>, Vec<[f64; 2]>)>, out: &mut Vec<DemoPair>| -> Result<()> {
        if let Some((label, n, nov, exp)) = cur {
            if nov.len() != n {
                return Err(Error::Format(format!("demo {label}: header says {n} samples, found {}", nov.len())));
            }
            out.push(DemoPair::new(nov, exp, label)?);
        }
        Ok(())
    };
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# demo ") {
            finish(current.take(), &mut demos)?;
            let mut parts = rest.rsplitn(2, ' ');
            let n = parts.next().and_then(|n| n.parse().ok());
            let label = parts.next();
            match (label, n) {
                (Some(l), Some(n)) => current = Some((l.to_string(), n, Vec::new(), Vec::new())),
                _ => return Err(Error::Format(format!("line {}: bad demo header", no + 1))),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", no + 1)))?;
        let Some((_, _, nov, exp)) = current.as_mut() else {
            return Err(Error::Format(format!("line {}: sample before any demo header", no + 1)));
        };
        if vals.len() != 5 {
            return Err(Error::Format(format!("line {}: expected 5 columns, got {}", no + 1, vals.len())));
        }
        nov.push([vals[1], vals[2]]);
        exp.push([vals[3], vals[4]]);
    }
    finish(current, &mut demos)?;
    Ok(demos)
}
