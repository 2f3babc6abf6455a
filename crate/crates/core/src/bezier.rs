//! Rational Bézier curves.
//!
//! Evaluation runs through the rational De Casteljau recursion (lerp in
//! homogeneous coordinates, then project). [`eval_bernstein`] evaluates the
//! closed Bernstein form and is kept as an independent reference.

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Control points and positive weights of one rational Bézier segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon {
    points: Vec<Point3<f64>>,
    weights: Vec<f64>,
}

impl ControlPolygon {
    pub fn new(points: Vec<Point3<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 2 control points, got {}",
                points.len()
            )));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidPolygon(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidPolygon(format!("weight {i} = {w} is not positive")));
        }
        if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidPolygon("non-finite control point".into()));
        }
        Ok(Self { points, weights })
    }

    /// Same points with every weight set to 1.
    pub fn uniform(points: Vec<Point3<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Curve order `n`, one less than the number of control points.
    pub fn order(&self) -> usize {
        self.points.len() - 1
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), weights)
    }

    pub fn first(&self) -> Point3<f64> {
        self.points[0]
    }

    pub fn last(&self) -> Point3<f64> {
        self.points[self.points.len() - 1]
    }

    /// Production evaluation path.
    pub fn eval(&self, t: CurveParam) -> Point3<f64> {
        eval_de_casteljau(self, t)
    }
}

/// Curve parameter restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CurveParam(f64);

impl CurveParam {
    pub fn new(t: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&t) {
            Ok(Self(t))
        } else {
            Err(Error::InvalidParameter(t))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(t: f64) -> Self {
        if t.is_nan() {
            Self(0.0)
        } else {
            Self(t.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Closed-form Bernstein evaluation.
pub fn eval_bernstein(poly: &ControlPolygon, t: CurveParam) -> Point3<f64> {
    let n = poly.order();
    let t = t.get();
    let mut num = nalgebra::Vector3::zeros();
    let mut den = 0.0;
    for (i, (p, w)) in poly.points.iter().zip(&poly.weights).enumerate() {
        let b = binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32) * w;
        num += p.coords * b;
        den += b;
    }
    Point3::from(num / den)
}

/// Rational De Casteljau: interpolate `(w·P, w)` and project.
pub fn eval_de_casteljau(poly: &ControlPolygon, t: CurveParam) -> Point3<f64> {
    let t = t.get();
    let s = 1.0 - t;
    let mut pts = poly.points.clone();
    let mut ws = poly.weights.clone();
    // affine form of the rational step: coincident points stay bit-exact
    for level in (1..pts.len()).rev() {
        for i in 0..level {
            let w = ws[i] * s + ws[i + 1] * t;
            let f = ws[i + 1] * t / w;
            let d = pts[i + 1] - pts[i];
            pts[i] += d * f;
            ws[i] = w;
        }
    }
    pts[0]
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn line_midpoint() {
        let poly = ControlPolygon::uniform(vec![p(0., 0., 0.), p(1., 0., 0.)]).unwrap();
        let t = CurveParam::new(0.5).unwrap();
        assert_eq!(eval_bernstein(&poly, t), p(0.5, 0.0, 0.0));
        assert!((eval_de_casteljau(&poly, t) - p(0.5, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn quarter_circle() {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let poly =
            ControlPolygon::new(vec![p(1., 0., 0.), p(1., 1., 0.), p(0., 1., 0.)], vec![1.0, w, 1.0])
                .unwrap();
        let t = CurveParam::new(0.5).unwrap();
        let a = eval_bernstein(&poly, t);
        let b = eval_de_casteljau(&poly, t);
        assert!((a.coords.norm() - 1.0).abs() < 1e-12);
        assert!((a - b).norm() < 1e-9);
        // the whole arc, not only the midpoint
        for k in 0..=20 {
            let t = CurveParam::new(k as f64 / 20.0).unwrap();
            assert!((eval_de_casteljau(&poly, t).coords.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_interpolated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for order in 1..=6 {
            let pts: Vec<_> = (0..=order)
                .map(|_| p(rng.random(), rng.random(), rng.random()))
                .collect();
            let ws: Vec<f64> = (0..=order).map(|_| rng.random_range(0.01..100.0)).collect();
            let poly = ControlPolygon::new(pts.clone(), ws).unwrap();
            assert!((poly.eval(CurveParam::new(0.0).unwrap()) - pts[0]).norm() < 1e-15);
            assert!((poly.eval(CurveParam::new(1.0).unwrap()) - pts[order]).norm() < 1e-15);
        }
    }

    #[test]
    fn order_six_agrees_with_bernstein() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..7).map(|_| p(rng.random(), rng.random(), rng.random())).collect();
        let ws: Vec<f64> = (0..7).map(|_| rng.random_range(0.01..100.0)).collect();
        let poly = ControlPolygon::new(pts, ws).unwrap();
        let worst = (0..100)
            .map(|_| {
                let t = CurveParam::new(rng.random()).unwrap();
                (eval_de_casteljau(&poly, t) - eval_bernstein(&poly, t)).norm()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn scaled_weights_same_curve() {
        let pts = vec![p(0., 0., 0.), p(0.3, 1., 0.), p(1., 1., 0.5), p(1.5, 0., 0.)];
        let a = ControlPolygon::new(pts.clone(), vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        let b = ControlPolygon::new(pts, vec![7.0, 14.0, 3.5, 21.0]).unwrap();
        for k in 0..=50 {
            let t = CurveParam::new(k as f64 / 50.0).unwrap();
            assert!((a.eval(t) - b.eval(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ControlPolygon::new(vec![p(0., 0., 0.)], vec![1.0]).is_err());
        assert!(ControlPolygon::new(vec![p(0., 0., 0.), p(1., 0., 0.)], vec![1.0]).is_err());
        assert!(ControlPolygon::new(vec![p(0., 0., 0.), p(1., 0., 0.)], vec![1.0, 0.0]).is_err());
        assert!(ControlPolygon::new(vec![p(0., 0., 0.), p(1., 0., 0.)], vec![1.0, -2.0]).is_err());
        assert!(CurveParam::new(1.0000001).is_err());
        assert!(CurveParam::new(-0.1).is_err());
        assert!(CurveParam::new(f64::NAN).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 0), 1.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(6, 6), 1.0);
        assert_eq!(binomial(5, 2), 10.0);
    }
}
