//! Symmetric five-bar leg: forward/inverse kinematics and the in-plane Jacobian.
//!
//! Leg-plane coordinates are `(u, z)`: `u` along the plane (forward when the
//! abduction angle is zero), `z` up. The two actuated hips sit at
//! `(-hip_sep/2, 0)` (rear motor, `theta1`) and `(+hip_sep/2, 0)` (front motor,
//! `theta2`). Angles are measured from `+u`, counter-clockwise. The leg plane is
//! rotated about the vertical axis by the abduction angle, so a plane point
//! `(u, z)` sits at `(u cos φ, u sin φ, z)` in the leg frame.

use nalgebra::{Matrix2, Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::Workspace;

/// Link dimensions in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub l_prox: f64,
    pub l_dist: f64,
    pub hip_sep: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { l_prox: 0.12, l_dist: 0.14, hip_sep: 0.04 }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_prox > 0.0 && self.l_dist > 0.0 && self.hip_sep > 0.0) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        if self.l_dist <= self.l_prox {
            return Err(Error::Config("l_dist must exceed l_prox".into()));
        }
        Ok(())
    }

    fn hips(&self) -> (Point2<f64>, Point2<f64>) {
        let h = self.hip_sep / 2.0;
        (Point2::new(-h, 0.0), Point2::new(h, 0.0))
    }
}

/// Actuated hip angles and the abduction (plane) angle, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub theta1: f64,
    pub theta2: f64,
    pub abduction: f64,
}

/// Intersections of two circles, ordered by ascending `z`.
fn circle_intersections(
    c1: Point2<f64>,
    r1: f64,
    c2: Point2<f64>,
    r2: f64,
) -> Option<(Point2<f64>, Point2<f64>)> {
    let d_vec = c2 - c1;
    let d = d_vec.norm();
    if d < 1e-15 || d > r1 + r2 || d < (r1 - r2).abs() {
        return None;
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let mid = c1 + d_vec * (a / d);
    let perp = Vector2::new(-d_vec.y, d_vec.x) / d;
    let p = mid + perp * h;
    let q = mid - perp * h;
    Some(if p.y <= q.y { (p, q) } else { (q, p) })
}

fn elbows(cfg: &LinkConfig, theta1: f64, theta2: f64) -> (Point2<f64>, Point2<f64>) {
    let (h1, h2) = cfg.hips();
    (
        h1 + Vector2::new(theta1.cos(), theta1.sin()) * cfg.l_prox,
        h2 + Vector2::new(theta2.cos(), theta2.sin()) * cfg.l_prox,
    )
}

/// In-plane forward kinematics; the foot is the lower circle intersection.
pub fn forward_planar(cfg: &LinkConfig, theta1: f64, theta2: f64) -> Result<Point2<f64>> {
    let (e1, e2) = elbows(cfg, theta1, theta2);
    circle_intersections(e1, cfg.l_dist, e2, cfg.l_dist)
        .map(|(low, _)| low)
        .ok_or_else(|| {
            Error::Unreachable(format!(
                "distal circles do not meet (theta1 = {theta1:.4}, theta2 = {theta2:.4})"
            ))
        })
}

pub fn forward(cfg: &LinkConfig, joints: &JointState) -> Result<Point3<f64>> {
    let f = forward_planar(cfg, joints.theta1, joints.theta2)?;
    Ok(plane_to_leg(f, joints.abduction))
}

pub fn plane_to_leg(p: Point2<f64>, abduction: f64) -> Point3<f64> {
    let (s, c) = abduction.sin_cos();
    Point3::new(p.x * c, p.x * s, p.y)
}

/// Splits a leg-frame point into its abduction angle in `(-π/2, π/2)` and the
/// in-plane coordinates.
pub fn leg_to_plane(p: &Point3<f64>) -> Result<(f64, Point2<f64>)> {
    let abduction = if p.x.abs() < 1e-15 {
        if p.y.abs() < 1e-15 {
            0.0
        } else {
            return Err(Error::OutsideWorkspace(format!(
                "point ({:.4}, {:.4}, {:.4}) needs a ±90° abduction",
                p.x, p.y, p.z
            )));
        }
    } else {
        (p.y / p.x).atan()
    };
    let (s, c) = abduction.sin_cos();
    Ok((abduction, Point2::new(p.x * c + p.y * s, p.z)))
}

/// In-plane inverse kinematics, knee-outward branch.
pub fn inverse_planar(cfg: &LinkConfig, foot: Point2<f64>) -> Result<(f64, f64)> {
    let (h1, h2) = cfg.hips();
    let solve = |hip: Point2<f64>, outward: f64, name: &str| -> Result<f64> {
        let (a, b) = circle_intersections(hip, cfg.l_prox, foot, cfg.l_dist).ok_or_else(|| {
            Error::Unreachable(format!(
                "foot ({:.4}, {:.4}) out of reach of the {name} hip (distance {:.4}, reach [{:.4}, {:.4}])",
                foot.x,
                foot.y,
                (foot - hip).norm(),
                cfg.l_dist - cfg.l_prox,
                cfg.l_dist + cfg.l_prox
            ))
        })?;
        // knee-outward: the elbow farther along `outward` on u
        let e = if (a.x - b.x) * outward >= 0.0 { a } else { b };
        Ok((e.y - hip.y).atan2(e.x - hip.x))
    };
    Ok((solve(h1, -1.0, "rear")?, solve(h2, 1.0, "front")?))
}

/// Inverse kinematics for a leg-frame foot point. When `workspace` is given,
/// the in-plane point must lie inside it.
pub fn inverse(
    cfg: &LinkConfig,
    foot: &Point3<f64>,
    workspace: Option<&Workspace>,
) -> Result<JointState> {
    let (abduction, planar) = leg_to_plane(foot)?;
    if let Some(ws) = workspace {
        ws.check(planar)?;
    }
    let (theta1, theta2) = inverse_planar(cfg, planar)?;
    Ok(JointState { theta1, theta2, abduction })
}

/// `d(u, z) / d(theta1, theta2)` without the singularity check.
pub fn jacobian_unchecked(cfg: &LinkConfig, theta1: f64, theta2: f64) -> Result<Matrix2<f64>> {
    let foot = forward_planar(cfg, theta1, theta2)?;
    let (e1, e2) = elbows(cfg, theta1, theta2);
    let a1 = foot - e1;
    let a2 = foot - e2;
    // |F - E_i|² = l_d²  ⇒  (F - E_i)·dF = (F - E_i)·(∂E_i/∂θ_i) dθ_i
    let de1 = Vector2::new(-theta1.sin(), theta1.cos()) * cfg.l_prox;
    let de2 = Vector2::new(-theta2.sin(), theta2.cos()) * cfg.l_prox;
    let a = Matrix2::new(a1.x, a1.y, a2.x, a2.y);
    let b = Matrix2::new(a1.dot(&de1), 0.0, 0.0, a2.dot(&de2));
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::Singular(a.determinant()))?;
    Ok(a_inv * b)
}

/// In-plane Jacobian (m/rad). Configurations with `|det J| < 1e-9` are flagged.
pub fn jacobian(cfg: &LinkConfig, joints: &JointState) -> Result<Matrix2<f64>> {
    let j = jacobian_unchecked(cfg, joints.theta1, joints.theta2)?;
    let det = j.determinant();
    if det.abs() < 1e-9 || !det.is_finite() {
        return Err(Error::Singular(det));
    }
    Ok(j)
}
