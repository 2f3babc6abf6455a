//! Turning geometry, control-point placement and trot phasing.
//!
//! A command `(v, r)` fixes, per leg, the plane angle φ about the vertical axis
//! and the step length. Control points are placed on the trapezoidal workspace
//! boundary of the leg plane; the Bézier weights (learned elsewhere) shape the
//! curve between them.

use nalgebra::{Point2, Point3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bezier::{ControlPolygon, CurveParam};
use crate::error::{Error, Result};

pub const SWING_POINTS: usize = 7;
pub const STANCE_POINTS: usize = 3;
/// Weights per leg: swing then stance.
pub const WEIGHTS_PER_LEG: usize = SWING_POINTS + STANCE_POINTS;
/// Fraction of the cycle spent in stance.
pub const STANCE_FRACTION: f64 = 0.5;

const CONTAINMENT_TOL: f64 = 1e-12;

/// Symmetric trapezoid in leg-plane `(u, z)` coordinates, wider at the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workspace {
    pub bottom_z: f64,
    pub bottom_half_width: f64,
    pub top_z: f64,
    pub top_half_width: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self { bottom_z: -0.19, bottom_half_width: 0.13, top_z: -0.12, top_half_width: 0.07 }
    }
}

impl Workspace {
    pub fn validate(&self) -> Result<()> {
        if !(self.bottom_half_width > 0.0 && self.top_half_width > 0.0 && self.top_z > self.bottom_z)
        {
            return Err(Error::Config("workspace trapezoid is degenerate".into()));
        }
        Ok(())
    }

    /// Corners counter-clockwise from bottom-left.
    pub fn corners(&self) -> [Point2<f64>; 4] {
        [
            Point2::new(-self.bottom_half_width, self.bottom_z),
            Point2::new(self.bottom_half_width, self.bottom_z),
            Point2::new(self.top_half_width, self.top_z),
            Point2::new(-self.top_half_width, self.top_z),
        ]
    }

    pub fn centre(&self) -> Point2<f64> {
        Point2::new(0.0, self.bottom_z)
    }

    /// Widest stride that fits on the bottom edge.
    pub fn max_stride(&self) -> f64 {
        2.0 * self.bottom_half_width
    }

    pub fn half_width_at(&self, z: f64) -> f64 {
        let s = (z - self.bottom_z) / (self.top_z - self.bottom_z);
        self.bottom_half_width + s * (self.top_half_width - self.bottom_half_width)
    }

    pub fn contains(&self, p: Point2<f64>) -> bool {
        self.check(p).is_ok()
    }

    pub fn check(&self, p: Point2<f64>) -> Result<()> {
        let (u, z) = (p.x, p.y);
        if z < self.bottom_z - CONTAINMENT_TOL {
            return Err(Error::OutsideWorkspace(format!("z = {z:.5} below bottom {}", self.bottom_z)));
        }
        if z > self.top_z + CONTAINMENT_TOL {
            return Err(Error::OutsideWorkspace(format!("z = {z:.5} above top {}", self.top_z)));
        }
        let hw = self.half_width_at(z.clamp(self.bottom_z, self.top_z));
        if u.abs() > hw + CONTAINMENT_TOL {
            return Err(Error::OutsideWorkspace(format!(
                "|u| = {:.5} beyond side edge {hw:.5} at z = {z:.5}",
                u.abs()
            )));
        }
        Ok(())
    }

    /// Point at fraction `a` across the width and `b` up the height.
    pub fn lerp(&self, a: f64, b: f64) -> Point2<f64> {
        let z = self.bottom_z + b * (self.top_z - self.bottom_z);
        let hw = self.half_width_at(z);
        Point2::new(-hw + 2.0 * hw * a, z)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2<f64> {
        loop {
            let u = rng.random_range(-self.bottom_half_width..=self.bottom_half_width);
            let z = rng.random_range(self.bottom_z..=self.top_z);
            let p = Point2::new(u, z);
            if self.contains(p) {
                return p;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChassisGeometry {
    pub length: f64,
    pub width: f64,
    pub r_min: f64,
    pub workspace: Workspace,
}

impl Default for ChassisGeometry {
    fn default() -> Self {
        Self { length: 0.24, width: 0.12, r_min: 0.3, workspace: Workspace::default() }
    }
}

impl ChassisGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0 && self.r_min > 0.0) {
            return Err(Error::Config("chassis length, width and r_min must be positive".into()));
        }
        self.workspace.validate()
    }

    /// Hip position of a leg relative to the chassis centre (x forward, y left).
    pub fn hip(&self, leg: LegId) -> Point2<f64> {
        let x = if leg.is_front() { self.length / 2.0 } else { -self.length / 2.0 };
        let y = if leg.is_left() { self.width / 2.0 } else { -self.width / 2.0 };
        Point2::new(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegId {
    Fl,
    Fr,
    Bl,
    Br,
}

impl LegId {
    pub const ALL: [LegId; 4] = [LegId::Fl, LegId::Fr, LegId::Bl, LegId::Br];

    pub fn delta(self) -> f64 {
        match self {
            LegId::Fl | LegId::Bl => 1.0,
            LegId::Fr | LegId::Br => -1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_front(self) -> bool {
        matches!(self, LegId::Fl | LegId::Fr)
    }

    pub fn is_left(self) -> bool {
        matches!(self, LegId::Fl | LegId::Bl)
    }

    pub fn name(self) -> &'static str {
        match self {
            LegId::Fl => "fl",
            LegId::Fr => "fr",
            LegId::Bl => "bl",
            LegId::Br => "br",
        }
    }
}

/// Signed turning radius; positive turns right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Straight,
    Finite(f64),
}

impl Radius {
    /// `+∞` encodes straight.
    pub fn to_f64(self) -> f64 {
        match self {
            Radius::Straight => f64::INFINITY,
            Radius::Finite(r) => r,
        }
    }

    pub fn from_f64(r: f64) -> Self {
        if r.is_infinite() {
            Radius::Straight
        } else {
            Radius::Finite(r)
        }
    }

    /// Signed curvature, 0 for straight.
    pub fn curvature(self) -> f64 {
        match self {
            Radius::Straight => 0.0,
            Radius::Finite(r) => 1.0 / r,
        }
    }

    fn checked(self, r_min: f64) -> Result<Option<f64>> {
        match self {
            Radius::Straight => Ok(None),
            Radius::Finite(r) if r.abs() >= r_min && r.is_finite() => Ok(Some(r)),
            Radius::Finite(r) => Err(Error::RadiusOutOfRange { radius: r, r_min }),
        }
    }
}

/// Normalized stick command in `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitCommand {
    pub v_norm: f64,
    pub r_norm: f64,
}

impl GaitCommand {
    pub fn new(v_norm: f64, r_norm: f64) -> Result<Self> {
        if !((-1.0..=1.0).contains(&v_norm) && (-1.0..=1.0).contains(&r_norm)) {
            return Err(Error::Config(format!("command ({v_norm}, {r_norm}) outside [-1, 1]²")));
        }
        Ok(Self { v_norm, r_norm })
    }
}

/// Planner-wide gait defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitDefaults {
    pub v_max: f64,
    pub cycle_time: f64,
    pub step_height: f64,
}

impl Default for GaitDefaults {
    fn default() -> Self {
        Self { v_max: 0.6, cycle_time: 1.0, step_height: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub v: f64,
    pub r: Radius,
    pub cycle_time: f64,
    /// Indexed by [`LegId::index`].
    pub phase_offset: [f64; 4],
}

impl GaitParams {
    /// Trot: diagonal pairs in phase, pairs half a cycle apart.
    pub fn trot(v: f64, r: Radius, cycle_time: f64) -> Self {
        Self { v, r, cycle_time, phase_offset: [0.0, 0.5, 0.5, 0.0] }
    }

    /// Maps a stick command: `v = max(v_norm, 0)·v_max`, `r_norm` is a fraction of
    /// the tightest curvature `1/r_min`, `r_norm = 0` is straight.
    pub fn from_command(cmd: GaitCommand, geom: &ChassisGeometry, defaults: &GaitDefaults) -> Self {
        let v = cmd.v_norm.max(0.0) * defaults.v_max;
        let r = if cmd.r_norm == 0.0 {
            Radius::Straight
        } else {
            Radius::Finite(geom.r_min / cmd.r_norm)
        };
        Self::trot(v, r, defaults.cycle_time)
    }

    pub fn validate(&self, defaults: &GaitDefaults) -> Result<()> {
        if !(0.0..=defaults.v_max + 1e-12).contains(&self.v) {
            return Err(Error::Config(format!("speed {} outside [0, {}]", self.v, defaults.v_max)));
        }
        if !(self.cycle_time > 0.0) {
            return Err(Error::Config("cycle_time must be positive".into()));
        }
        Ok(())
    }
}

/// Plane angle of a leg, radians.
pub fn leg_plane_angle(r: Radius, leg: LegId, geom: &ChassisGeometry) -> Result<f64> {
    match r.checked(geom.r_min)? {
        None => Ok(0.0),
        Some(r) => Ok(((geom.length / 2.0)
            / (r.abs() + leg.delta() * r.signum() * geom.width / 2.0))
            .atan()),
    }
}

/// Hip travel of a leg over one second, metres.
pub fn step_length(v: f64, r: Radius, leg: LegId, geom: &ChassisGeometry) -> Result<f64> {
    match r.checked(geom.r_min)? {
        None => Ok(v),
        Some(r) => Ok(v * (r.abs() + leg.delta() * geom.width / 2.0) / r.abs()),
    }
}

/// Foot displacement during one stance phase.
pub fn stride(step_length: f64, cycle_time: f64) -> f64 {
    step_length * cycle_time * STANCE_FRACTION
}

/// Foot path over a full gait cycle, local phase in `[0, 1)`.
pub trait FootPath {
    fn position(&self, local_phase: f64) -> Point3<f64>;
    /// Plane angle of the path.
    fn plane_angle(&self) -> f64;

    /// Derivative with respect to local phase, taken inside the segment
    /// (swing or stance) that contains `local_phase`.
    fn phase_velocity(&self, local_phase: f64) -> nalgebra::Vector3<f64> {
        const H: f64 = 1e-6;
        let s = local_phase.rem_euclid(1.0);
        let (lo, hi) = if s < 1.0 - STANCE_FRACTION {
            (0.0, 1.0 - STANCE_FRACTION)
        } else {
            (1.0 - STANCE_FRACTION, 1.0 - 1e-12)
        };
        let a = (s - H).max(lo);
        let b = (s + H).min(hi);
        (self.position(b) - self.position(a)) / (b - a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootTrajectory {
    pub swing: ControlPolygon,
    pub stance: ControlPolygon,
    pub phi: f64,
    pub sl: f64,
    pub stride: f64,
}

fn tilt(p: Point2<f64>, phi: f64) -> Point3<f64> {
    crate::kinematics::plane_to_leg(p, phi)
}

/// Places swing (7) and stance (3) control points with unit weights. The
/// swing starts at the rear end of the stride, visits both bottom corners and
/// three points on the top edge, and lands `stride` ahead; stance closes the loop.
/// A zero stride collapses every point onto the workspace centre (standing).
pub fn place_control_points(phi: f64, stride: f64, geom: &ChassisGeometry) -> Result<FootTrajectory> {
    let ws = &geom.workspace;
    if !(stride >= 0.0) {
        return Err(Error::Config(format!("negative stride {stride}")));
    }
    if stride > ws.max_stride() + CONTAINMENT_TOL {
        return Err(Error::StrideTooLarge { stride, max: ws.max_stride() });
    }
    let c = ws.centre();
    if stride == 0.0 {
        // standing: every point on the centre, the foot does not move
        let stand = tilt(c, phi);
        return Ok(FootTrajectory {
            swing: ControlPolygon::uniform(vec![stand; SWING_POINTS])?,
            stance: ControlPolygon::uniform(vec![stand; STANCE_POINTS])?,
            phi,
            sl: f64::NAN,
            stride,
        });
    }
    let half = stride / 2.0;
    let (zb, zt) = (ws.bottom_z, ws.top_z);
    let swing_2d = [
        Point2::new(c.x - half, zb),
        Point2::new(-ws.bottom_half_width, zb),
        Point2::new(-ws.top_half_width, zt),
        Point2::new(c.x, zt),
        Point2::new(ws.top_half_width, zt),
        Point2::new(ws.bottom_half_width, zb),
        Point2::new(c.x + half, zb),
    ];
    let stance_2d = [Point2::new(c.x + half, zb), Point2::new(c.x, zb), Point2::new(c.x - half, zb)];
    let swing = ControlPolygon::uniform(swing_2d.iter().map(|&p| tilt(p, phi)).collect())?;
    let stance = ControlPolygon::uniform(stance_2d.iter().map(|&p| tilt(p, phi)).collect())?;
    Ok(FootTrajectory { swing, stance, phi, sl: f64::NAN, stride })
}

impl FootTrajectory {
    /// Full planning for one leg: angle, step length, stride and points.
    pub fn plan(params: &GaitParams, leg: LegId, geom: &ChassisGeometry) -> Result<Self> {
        let phi = leg_plane_angle(params.r, leg, geom)?;
        let sl = step_length(params.v, params.r, leg, geom)?;
        let mut traj = place_control_points(phi, stride(sl, params.cycle_time), geom)?;
        traj.sl = sl;
        Ok(traj)
    }

    /// Applies `[swing.., stance..]` weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != WEIGHTS_PER_LEG {
            return Err(Error::LengthMismatch(format!(
                "expected {WEIGHTS_PER_LEG} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self {
            swing: self.swing.with_weights(weights[..SWING_POINTS].to_vec())?,
            stance: self.stance.with_weights(weights[SWING_POINTS..].to_vec())?,
            ..self.clone()
        })
    }

    pub fn control_points(&self) -> impl Iterator<Item = &Point3<f64>> {
        self.swing.points().iter().chain(self.stance.points())
    }
}

impl FootPath for FootTrajectory {
    fn position(&self, local_phase: f64) -> Point3<f64> {
        let s = local_phase.rem_euclid(1.0);
        if s < 1.0 - STANCE_FRACTION {
            self.swing.eval(CurveParam::clamped(s / (1.0 - STANCE_FRACTION)))
        } else {
            self.stance.eval(CurveParam::clamped((s - (1.0 - STANCE_FRACTION)) / STANCE_FRACTION))
        }
    }

    fn plane_angle(&self) -> f64 {
        self.phi
    }
}

/// Local phase of a leg at a global phase.
pub fn local_phase(params: &GaitParams, global_phase: f64, leg: LegId) -> f64 {
    (global_phase + params.phase_offset[leg.index()]).rem_euclid(1.0)
}

pub fn foot_position(
    params: &GaitParams,
    path: &impl FootPath,
    global_phase: f64,
    leg: LegId,
) -> Point3<f64> {
    path.position(local_phase(params, global_phase, leg))
}

/// Semi-elliptical swing over the same stride, straight stance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticalTrajectory {
    pub stride: f64,
    pub step_height: f64,
    pub phi: f64,
    pub ground_z: f64,
    pub centre_u: f64,
}

pub fn elliptical_baseline(stride: f64, step_height: f64, phi: f64, geom: &ChassisGeometry) -> EllipticalTrajectory {
    let c = geom.workspace.centre();
    EllipticalTrajectory { stride, step_height, phi, ground_z: c.y, centre_u: c.x }
}

impl EllipticalTrajectory {
    pub fn plan(params: &GaitParams, leg: LegId, geom: &ChassisGeometry, step_height: f64) -> Result<Self> {
        let phi = leg_plane_angle(params.r, leg, geom)?;
        let sl = step_length(params.v, params.r, leg, geom)?;
        let st = stride(sl, params.cycle_time);
        if st > geom.workspace.max_stride() + CONTAINMENT_TOL {
            return Err(Error::StrideTooLarge { stride: st, max: geom.workspace.max_stride() });
        }
        Ok(elliptical_baseline(st, step_height, phi, geom))
    }
}

impl FootPath for EllipticalTrajectory {
    fn position(&self, local_phase: f64) -> Point3<f64> {
        let s = local_phase.rem_euclid(1.0);
        let half = self.stride / 2.0;
        let p = if s < 1.0 - STANCE_FRACTION {
            let a = std::f64::consts::PI * s / (1.0 - STANCE_FRACTION);
            Point2::new(self.centre_u - half * a.cos(), self.ground_z + self.step_height * a.sin())
        } else {
            let a = (s - (1.0 - STANCE_FRACTION)) / STANCE_FRACTION;
            Point2::new(self.centre_u + half - self.stride * a, self.ground_z)
        };
        tilt(p, self.phi)
    }

    fn plane_angle(&self) -> f64 {
        self.phi
    }
}
