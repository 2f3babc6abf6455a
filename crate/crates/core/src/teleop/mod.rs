//! Teleoperation session: stick samples in, shaped commands and a kinematic
//! robot pose out.

pub mod server;
pub mod wire;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::library::{GaitLibrary, LibraryCell};
use crate::planner::{ChassisGeometry, GaitCommand, GaitDefaults, GaitParams};
use crate::shaper::filters::{CommandWindow, SAMPLE_RATE};
use crate::shaper::network::{top_indices, Network};
use crate::shaper::DemoPair;

pub use wire::{Envelope, Mode, TopFilters, WireMessage, PROTOCOL_VERSION};

/// Full-stick speed, m/s.
pub const V_MAX: f64 = 0.6;
/// Yaw-rate limit, rad/s.
pub const OMEGA_MAX: f64 = 2.0 * PI / 3.0;
/// Longest gap bridged tick by tick; older ticks cannot influence the window.
const MAX_CATCH_UP: usize = crate::shaper::WINDOW_LEN;

/// Planar pose in a north-east frame: `x` north, `y` east, `yaw` clockwise
/// from north seen from above, so a positive radius command turns right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    /// Wrapped to (−π, π].
    pub yaw: f64,
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Unicycle step with exact arc integration: `v = 0.6·v_norm`,
/// `ω = v·r_norm/r_min` limited to ±2π/3.
pub fn integrate_pose(pose: RobotPose, v_norm: f64, r_norm: f64, dt: f64, r_min: f64) -> RobotPose {
    let v = v_norm * V_MAX;
    let omega = (v * r_norm / r_min).clamp(-OMEGA_MAX, OMEGA_MAX);
    let th = omega * dt;
    let (dx, dy) = if th.abs() < 1e-12 {
        (v * dt * pose.yaw.cos(), v * dt * pose.yaw.sin())
    } else {
        let rad = v / omega;
        (rad * ((pose.yaw + th).sin() - pose.yaw.sin()), -rad * ((pose.yaw + th).cos() - pose.yaw.cos()))
    };
    RobotPose { x: pose.x + dx, y: pose.y + dy, yaw: wrap_angle(pose.yaw + th) }
}

/// Immutable data shared by all sessions.
#[derive(Debug, Clone)]
pub struct SessionAssets {
    pub shaper: Arc<Network>,
    pub library: Option<Arc<GaitLibrary>>,
    pub geom: ChassisGeometry,
    pub gait: GaitDefaults,
}

impl SessionAssets {
    pub fn new(shaper: Network) -> Self {
        Self { shaper: Arc::new(shaper), library: None, geom: ChassisGeometry::default(), gait: GaitDefaults::default() }
    }
}

/// One operator session. Inputs are resampled to 200 Hz with a zero-order
/// hold; every model tick pushes the held sample into the window, runs the
/// shaper and advances the pose with the active mode's command.
#[derive(Debug, Clone)]
pub struct Session {
    assets: SessionAssets,
    window: CommandWindow,
    pose: RobotPose,
    mode: Mode,
    /// Time of the last processed tick.
    clock: Option<f64>,
    last_input: Option<f64>,
    raw: [f64; 2],
    shaped: [f64; 2],
    top: TopFilters,
}

impl Session {
    pub fn new(assets: SessionAssets, mode: Mode) -> Self {
        Self {
            assets,
            window: CommandWindow::zeros(),
            pose: RobotPose::default(),
            mode,
            clock: None,
            last_input: None,
            raw: [0.0; 2],
            shaped: [0.0; 2],
            top: TopFilters::default(),
        }
    }

    pub fn pose(&self) -> RobotPose {
        self.pose
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn window(&self) -> &CommandWindow {
        &self.window
    }

    /// Gait library cell for the command currently driving the robot.
    pub fn active_gait(&self) -> Option<&LibraryCell> {
        let lib = self.assets.library.as_ref()?;
        let [v, r] = self.driving();
        let cmd = GaitCommand::new(v, r).ok()?;
        let p = GaitParams::from_command(cmd, &self.assets.geom, &self.assets.gait);
        Some(lib.lookup(p.v, p.r))
    }

    fn driving(&self) -> [f64; 2] {
        match self.mode {
            Mode::Raw => self.raw,
            Mode::Shaped => self.shaped,
        }
    }

    /// Advances the pose over the elapsed `dt` with the command that was in
    /// effect, then takes in the next sample.
    fn tick(&mut self, sample: [f64; 2], dt: f64) {
        let [v, r] = self.driving();
        self.pose = integrate_pose(self.pose, v, r, dt, self.assets.geom.r_min);
        self.window.push(sample);
        self.raw = sample;
        let tr = self.assets.shaper.forward(&self.window);
        self.shaped = tr.output.map(|x| x.clamp(-1.0, 1.0));
        self.top = if tr.probs[0].is_empty() {
            TopFilters::default()
        } else {
            TopFilters { v: top_indices(&tr.probs[0], 3), r: top_indices(&tr.probs[1], 3) }
        };
    }

    fn update(&self, t: f64) -> WireMessage {
        WireMessage::StateUpdate { t, raw: self.raw, shaped: self.shaped, pose: self.pose, top_filters: self.top.clone() }
    }

    /// Processes a stick sample at time `t` (seconds) and returns the replies:
    /// a state update, preceded by an error notice when the input was clamped,
    /// or only a notice when the timestamp is stale.
    pub fn on_stick(&mut self, t: f64, v: f64, r: f64) -> Vec<WireMessage> {
        let mut out = Vec::new();
        if !(t.is_finite() && v.is_finite() && r.is_finite()) {
            out.push(WireMessage::Error { text: "non-finite stick sample dropped".into() });
            return out;
        }
        if self.last_input.is_some_and(|last| t <= last) {
            out.push(WireMessage::Error { text: format!("stale timestamp {t} dropped") });
            return out;
        }
        let sample = [v.clamp(-1.0, 1.0), r.clamp(-1.0, 1.0)];
        if sample != [v, r] {
            out.push(WireMessage::Error { text: format!("stick ({v}, {r}) clamped to [-1, 1]") });
        }
        let dt = 1.0 / SAMPLE_RATE;
        match self.clock {
            None => {
                self.tick(sample, 0.0);
                self.clock = Some(t);
            }
            Some(clock) => {
                // ticks strictly before t hold the previous sample, the tick at t takes the new one
                let due = ((t - clock) / dt + 1e-9).floor() as usize;
                let skipped = due.saturating_sub(MAX_CATCH_UP);
                if skipped > 0 {
                    let [hv, hr] = self.driving();
                    self.pose = integrate_pose(self.pose, hv, hr, skipped as f64 * dt, self.assets.geom.r_min);
                }
                let held = self.raw;
                for k in skipped + 1..=due {
                    let tk = clock + k as f64 * dt;
                    self.tick(if tk + 1e-9 >= t { sample } else { held }, dt);
                }
                self.clock = Some(clock + due as f64 * dt);
                if due == 0 {
                    // between ticks: the new sample is held until the next one
                    self.raw = sample;
                }
            }
        }
        self.last_input = Some(t);
        out.push(self.update(t));
        out
    }

    /// Handles one inbound message.
    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        match msg {
            WireMessage::StickInput { t, v, r } => self.on_stick(t, v, r),
            WireMessage::ModeSet { mode } => {
                self.mode = mode;
                vec![self.update(self.last_input.unwrap_or(0.0))]
            }
            WireMessage::StateUpdate { .. } | WireMessage::Error { .. } => {
                vec![WireMessage::Error { text: "clients may only send stick_input and mode_set".into() }]
            }
        }
    }
}

/// One replayed model tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub t: f64,
    pub raw: [f64; 2],
    pub shaped: [f64; 2],
    pub pose: RobotPose,
}

/// Feeds `series` at the model rate through a fresh session.
pub fn replay(series: &[[f64; 2]], assets: &SessionAssets, mode: Mode) -> Vec<ReplayRow> {
    let mut s = Session::new(assets.clone(), mode);
    series
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let t = k as f64 / SAMPLE_RATE;
            s.on_stick(t, x[0], x[1]);
            ReplayRow { t, raw: s.raw, shaped: s.shaped, pose: s.pose }
        })
        .collect()
}

/// Replays the novice side of a demo.
pub fn replay_demo(demo: &DemoPair, assets: &SessionAssets, mode: Mode) -> Vec<ReplayRow> {
    replay(&demo.novice, assets, mode)
}

pub fn replay_to_text(rows: &[ReplayRow], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("# columns: t v_raw r_raw v_shaped r_shaped x y yaw\n");
    for r in rows {
        s.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            r.t, r.raw[0], r.raw[1], r.shaped[0], r.shaped[1], r.pose.x, r.pose.y, r.pose.yaw
        ));
    }
    s
}

#[cfg(test)]
mod tests;
