//! Deterministic surrogate for scoring a gait.
//!
//! Stance is declared by phase. The body is a point mass at `com_height` above
//! the ground, carried by the stance legs acting as vertical springs at their
//! hip stations. Each step the vertical loads are distributed to balance the
//! moments produced by the body's horizontal acceleration and by the reaction
//! forces of the swinging feet (point masses). Unequal loads compress the legs
//! unequally; the tilt of the hip stations is the body attitude.
//!
//! Per step the cost is `E + 0.1·|roll| + 0.05·|pitch|` with
//! `E = Σ_motors |ω·τ|·dt`.

use nalgebra::{DMatrix, DVector, Matrix2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{self, JointState, LinkConfig};
use crate::planner::{
    self, ChassisGeometry, EllipticalTrajectory, FootPath, FootTrajectory, GaitParams, LegId,
    WEIGHTS_PER_LEG,
};

pub const MOTORS: usize = 12;
pub const ROLL_WEIGHT: f64 = 0.1;
pub const PITCH_WEIGHT: f64 = 0.05;

/// Bézier weights for all four legs, indexed by [`LegId::index`].
pub type LegWeights = [[f64; WEIGHTS_PER_LEG]; 4];

pub fn uniform_weights() -> LegWeights {
    [[1.0; WEIGHTS_PER_LEG]; 4]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Control timestep, s.
    pub dt: f64,
    /// Number of control steps per rollout.
    pub steps: usize,
    /// Body mass, kg.
    pub mass: f64,
    pub gravity: f64,
    /// Effective swinging mass at each foot, kg.
    pub foot_mass: f64,
    /// Vertical leg stiffness, N/m.
    pub leg_stiffness: f64,
    /// Centre of mass above the ground, m.
    pub com_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            steps: 200,
            mass: 3.0,
            gravity: 9.81,
            foot_mass: 0.2,
            leg_stiffness: 1500.0,
            com_height: 0.19,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.mass > 0.0 && self.steps >= 1) {
            return Err(Error::Config("sim needs dt > 0, mass > 0, steps ≥ 1".into()));
        }
        if !(self.gravity >= 0.0 && self.foot_mass >= 0.0 && self.leg_stiffness > 0.0 && self.com_height >= 0.0) {
            return Err(Error::Config("sim physical constants out of range".into()));
        }
        Ok(())
    }

    /// Steps needed to cover `cycles` gait cycles.
    pub fn steps_for(&self, cycle_time: f64, cycles: f64) -> usize {
        (cycles * cycle_time / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Joules.
    pub energy: f64,
    pub roll_pen: f64,
    pub pitch_pen: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn attitude_penalty(&self) -> f64 {
        self.roll_pen + self.pitch_pen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyAttitude {
    pub roll: f64,
    pub pitch: f64,
}

/// Motor angles per step: for each leg `[theta1, theta2, abduction]`, legs in
/// [`LegId::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSeries {
    pub angles: Vec<[f64; MOTORS]>,
}

impl JointSeries {
    pub fn motor(&self, m: usize) -> impl Iterator<Item = f64> + '_ {
        self.angles.iter().map(move |a| a[m])
    }
}

/// `Σ_steps Σ_motors |ω·τ|·dt` over time-major series.
pub fn energy(omega: &[Vec<f64>], tau: &[Vec<f64>], dt: f64) -> Result<f64> {
    if omega.len() != tau.len() {
        return Err(Error::LengthMismatch(format!(
            "{} omega steps vs {} torque steps",
            omega.len(),
            tau.len()
        )));
    }
    let mut e = 0.0;
    for (k, (w, t)) in omega.iter().zip(tau).enumerate() {
        if w.len() != t.len() {
            return Err(Error::LengthMismatch(format!("step {k}: {} vs {} motors", w.len(), t.len())));
        }
        e += step_energy(w, t, dt);
    }
    Ok(e)
}

fn step_energy(omega: &[f64], tau: &[f64], dt: f64) -> f64 {
    omega.iter().zip(tau).map(|(w, t)| (w * t).abs()).sum::<f64>() * dt
}

/// Roll and pitch of the plane through support points given as `(x, y)`
/// chassis stations (x forward, y left) and heights `z`. Positive pitch is
/// nose-down, positive roll is left-side-down. With two points the plane
/// contains their line and is level across it.
pub fn body_attitude(points: &[Point3<f64>]) -> Result<BodyAttitude> {
    let n = points.len();
    if n < 2 {
        return Err(Error::AttitudeUndefined(n));
    }
    let line_fit = |a: &Point3<f64>, b: &Point3<f64>| -> Result<Vector2<f64>> {
        let d = Vector2::new(b.x - a.x, b.y - a.y);
        let len2 = d.norm_squared();
        if len2 < 1e-18 {
            return Err(Error::AttitudeUndefined(1));
        }
        Ok(d * ((b.z - a.z) / len2))
    };
    let grad = if n == 2 {
        line_fit(&points[0], &points[1])?
    } else {
        let a = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => points[i].x,
            _ => points[i].y,
        });
        let b = DVector::from_iterator(n, points.iter().map(|p| p.z));
        let ata = a.transpose() * &a;
        if ata.determinant().abs() < 1e-14 {
            // collinear stations: fall back to the extreme pair
            let (i, j) = farthest_pair(points);
            line_fit(&points[i], &points[j])?
        } else {
            let sol = ata.lu().solve(&(a.transpose() * b)).ok_or(Error::AttitudeUndefined(n))?;
            Vector2::new(sol[1], sol[2])
        }
    };
    Ok(BodyAttitude { roll: (-grad.y).atan(), pitch: (-grad.x).atan() })
}

fn farthest_pair(points: &[Point3<f64>]) -> (usize, usize) {
    let mut best = (0, 1, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i].xy() - points[j].xy()).norm_squared();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

/// Static load sharing: every stance foot pushes down with `m·g/n`, torques
/// `τ = Jᵀ f` with `f` the force the foot exerts on the ground; swing legs and
/// abduction carry no torque. Output in [`JointSeries`] motor order.
pub fn quasi_static_torques(
    links: &LinkConfig,
    joints: &[JointState; 4],
    stance: [bool; 4],
    mass: f64,
    gravity: f64,
) -> Result<[f64; MOTORS]> {
    let n = stance.iter().filter(|s| **s).count();
    if n == 0 {
        return Err(Error::Config("no stance leg".into()));
    }
    let mut out = [0.0; MOTORS];
    for (leg, js) in joints.iter().enumerate() {
        if !stance[leg] {
            continue;
        }
        let j = kinematics::jacobian(links, js)?;
        let tau = j.transpose() * Vector2::new(0.0, -mass * gravity / n as f64);
        out[3 * leg] = tau.x;
        out[3 * leg + 1] = tau.y;
    }
    Ok(out)
}

/// Surrogate scoring context.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Surrogate {
    pub geom: ChassisGeometry,
    pub links: LinkConfig,
    pub sim: SimConfig,
}

impl Surrogate {
    pub fn new(geom: ChassisGeometry, links: LinkConfig, sim: SimConfig) -> Self {
        Self { geom, links, sim }
    }

    pub fn from_config(cfg: &crate::Config) -> Self {
        Self::new(cfg.chassis, cfg.links, cfg.sim)
    }

    pub fn bezier_paths(&self, params: &GaitParams, weights: &LegWeights) -> Result<[FootTrajectory; 4]> {
        let plan = |leg: LegId| {
            FootTrajectory::plan(params, leg, &self.geom)?.with_weights(&weights[leg.index()])
        };
        Ok([plan(LegId::Fl)?, plan(LegId::Fr)?, plan(LegId::Bl)?, plan(LegId::Br)?])
    }

    pub fn elliptical_paths(&self, params: &GaitParams, step_height: f64) -> Result<[EllipticalTrajectory; 4]> {
        let plan = |leg| EllipticalTrajectory::plan(params, leg, &self.geom, step_height);
        Ok([plan(LegId::Fl)?, plan(LegId::Fr)?, plan(LegId::Bl)?, plan(LegId::Br)?])
    }

    fn phase_at(&self, params: &GaitParams, k: isize) -> f64 {
        (k as f64 * self.sim.dt / params.cycle_time).rem_euclid(1.0)
    }

    /// Foot positions at steps `-1..=steps` (index shifted by one) and joint
    /// angles at steps `-1..steps`.
    fn kinematic_tables<P: FootPath>(
        &self,
        paths: &[P; 4],
        params: &GaitParams,
    ) -> Result<(Vec<[Point3<f64>; 4]>, Vec<[JointState; 4]>)> {
        let steps = self.sim.steps as isize;
        let mut feet = Vec::with_capacity(self.sim.steps + 2);
        let mut joints = Vec::with_capacity(self.sim.steps + 1);
        for k in -1..=steps {
            let g = self.phase_at(params, k);
            let mut f = [Point3::origin(); 4];
            let mut js = [JointState::default(); 4];
            for leg in LegId::ALL {
                let i = leg.index();
                let local = planner::local_phase(params, g, leg);
                f[i] = paths[i].position(local);
                if k < steps {
                    let (_, planar) = kinematics::leg_to_plane(&f[i]).map_err(|e| Error::TrajectoryIk {
                        phase: local,
                        leg: leg.name(),
                        source: Box::new(e),
                    })?;
                    let (t1, t2) = kinematics::inverse_planar(&self.links, planar).map_err(|e| {
                        Error::TrajectoryIk { phase: local, leg: leg.name(), source: Box::new(e) }
                    })?;
                    js[i] = JointState { theta1: t1, theta2: t2, abduction: paths[i].plane_angle() };
                }
            }
            feet.push(f);
            if k < steps {
                joints.push(js);
            }
        }
        Ok((feet, joints))
    }

    /// Motor angle series over the rollout horizon.
    pub fn joint_series<P: FootPath>(&self, paths: &[P; 4], params: &GaitParams) -> Result<JointSeries> {
        let (_, joints) = self.kinematic_tables(paths, params)?;
        Ok(JointSeries {
            angles: joints[1..]
                .iter()
                .map(|js| {
                    let mut a = [0.0; MOTORS];
                    for (i, j) in js.iter().enumerate() {
                        a[3 * i] = j.theta1;
                        a[3 * i + 1] = j.theta2;
                        a[3 * i + 2] = j.abduction;
                    }
                    a
                })
                .collect(),
        })
    }

    /// Body velocity in the chassis frame: minus the mean in-segment velocity
    /// of the stance feet.
    fn body_velocity<P: FootPath>(&self, paths: &[P; 4], params: &GaitParams, k: isize) -> Vector3<f64> {
        let g = self.phase_at(params, k);
        let mut sum = Vector3::zeros();
        let mut n = 0;
        for leg in LegId::ALL {
            let local = planner::local_phase(params, g, leg);
            if local >= 1.0 - planner::STANCE_FRACTION {
                sum += paths[leg.index()].phase_velocity(local) / params.cycle_time;
                n += 1;
            }
        }
        -sum / n.max(1) as f64
    }

    /// Vertical stance loads at hip stations that best balance `moment`
    /// (about x and y) while summing to `fz`.
    fn distribute_loads(&self, stance: &[usize], fz: f64, moment: Vector2<f64>) -> Vec<f64> {
        let n = stance.len();
        // rows: moment about x is Σ y·f, about y is -Σ x·f; solve KKT with Σ f = fz
        let mut a = DMatrix::zeros(2, n);
        for (c, &leg) in stance.iter().enumerate() {
            let h = self.geom.hip(LegId::ALL[leg]);
            a[(0, c)] = h.y;
            a[(1, c)] = -h.x;
        }
        let target = DVector::from_vec(vec![-moment.x, -moment.y]);
        let mut kkt = DMatrix::zeros(n + 1, n + 1);
        let ata = a.transpose() * &a;
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = ata[(i, j)] + if i == j { 1e-9 } else { 0.0 };
            }
            kkt[(i, n)] = 1.0;
            kkt[(n, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        let atb = a.transpose() * target;
        for i in 0..n {
            rhs[i] = atb[i];
        }
        rhs[n] = fz;
        match kkt.lu().solve(&rhs) {
            Some(sol) => (0..n).map(|i| sol[i]).collect(),
            None => vec![fz / n as f64; n],
        }
    }

    pub fn rollout<P: FootPath>(&self, paths: &[P; 4], params: &GaitParams) -> Result<CostBreakdown> {
        let (feet, joints) = self.kinematic_tables(paths, params)?;
        let sim = &self.sim;
        let dt = sim.dt;
        let g = Vector3::new(0.0, 0.0, sim.gravity);
        let mut cost = CostBreakdown::default();
        for k in 0..sim.steps {
            let gp = self.phase_at(params, k as isize);
            let (prev, cur, next) = (&feet[k], &feet[k + 1], &feet[k + 2]);
            let accel: [Vector3<f64>; 4] =
                std::array::from_fn(|i| (next[i].coords - 2.0 * cur[i].coords + prev[i].coords) / (dt * dt));
            let stance: Vec<usize> = LegId::ALL
                .iter()
                .filter(|&&leg| planner::local_phase(params, gp, leg) >= 1.0 - planner::STANCE_FRACTION)
                .map(|l| l.index())
                .collect();
            let swing: Vec<usize> = (0..4).filter(|i| !stance.contains(i)).collect();

            // stance feet are fixed to the ground, so the body moves opposite to them
            let body_acc = (self.body_velocity(paths, params, k as isize)
                - self.body_velocity(paths, params, k as isize - 1))
                / dt;
            let swing_force: Vec<Vector3<f64>> = swing.iter().map(|&i| (accel[i] + g) * sim.foot_mass).collect();
            let ground = Vector3::new(body_acc.x, body_acc.y, 0.0) * sim.mass
                + g * sim.mass
                + swing_force.iter().sum::<Vector3<f64>>();
            // horizontal ground forces act com_height below the centre of mass;
            // swing reactions act at the hips
            let mut moment = Vector2::new(sim.com_height * ground.y, -sim.com_height * ground.x);
            for (&i, f) in swing.iter().zip(&swing_force) {
                let h = self.geom.hip(LegId::ALL[i]);
                moment += Vector2::new(-h.y * f.z, h.x * f.z);
            }
            let loads = self.distribute_loads(&stance, ground.z, moment);

            let stations: Vec<Point3<f64>> = stance
                .iter()
                .zip(&loads)
                .map(|(&i, f)| {
                    let h = self.geom.hip(LegId::ALL[i]);
                    Point3::new(h.x, h.y, -f / sim.leg_stiffness)
                })
                .collect();
            let att = body_attitude(&stations)?;

            let mut w = [0.0; MOTORS];
            let mut t = [0.0; MOTORS];
            for i in 0..4 {
                let (j_prev, j_cur) = (&joints[k][i], &joints[k + 1][i]);
                w[3 * i] = (j_cur.theta1 - j_prev.theta1) / dt;
                w[3 * i + 1] = (j_cur.theta2 - j_prev.theta2) / dt;
                let force = if let Some(c) = stance.iter().position(|&s| s == i) {
                    let h = Vector3::new(ground.x, ground.y, 0.0) / stance.len() as f64;
                    -(h + Vector3::new(0.0, 0.0, loads[c]))
                } else {
                    swing_force[swing.iter().position(|&s| s == i).unwrap()]
                };
                let (s, c) = j_cur.abduction.sin_cos();
                let planar = Vector2::new(force.x * c + force.y * s, force.z);
                let jac: Matrix2<f64> = kinematics::jacobian_unchecked(&self.links, j_cur.theta1, j_cur.theta2)?;
                let tq = jac.transpose() * planar;
                t[3 * i] = tq.x;
                t[3 * i + 1] = tq.y;
            }
            let e = step_energy(&w, &t, dt);
            let (rp, pp) = (ROLL_WEIGHT * att.roll.abs(), PITCH_WEIGHT * att.pitch.abs());
            cost.energy += e;
            cost.roll_pen += rp;
            cost.pitch_pen += pp;
        }
        cost.total = cost.energy + cost.roll_pen + cost.pitch_pen;
        Ok(cost)
    }

    /// Rollout of the Bézier gait with the given weights.
    pub fn rollout_cost(&self, weights: &LegWeights, params: &GaitParams) -> Result<CostBreakdown> {
        let paths = self.bezier_paths(params, weights)?;
        self.rollout(&paths, params)
    }
}
