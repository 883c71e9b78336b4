use std::fmt;
use std::sync::Arc;

use super::manifold::{Manifold, Point, Tangent};
use crate::error::{GaugeError, Result};

type CurveFn = Arc<dyn Fn(f64) -> Point + Send + Sync>;

/// One piece of a path, parametrized over tau in [0, 1].
#[derive(Clone)]
pub enum Segment {
    /// tau -> exp_start(tau * velocity)
    Geodesic { start: Point, velocity: Tangent },
    /// tau -> curve(t0 + tau (t1 - t0)); velocity by central differences
    Parametric { curve: CurveFn, t0: f64, t1: f64, length: f64 },
}

impl fmt::Debug for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Geodesic { start, velocity } => f
                .debug_struct("Geodesic")
                .field("start", &start.as_slice())
                .field("velocity", &velocity.as_slice())
                .finish(),
            Segment::Parametric { t0, t1, length, .. } => f
                .debug_struct("Parametric")
                .field("t0", t0)
                .field("t1", t1)
                .field("length", length)
                .finish(),
        }
    }
}

// 8-point Gauss-Legendre nodes/weights on [-1, 1]
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl Segment {
    pub fn parametric(curve: CurveFn, t0: f64, t1: f64) -> Segment {
        let mut seg = Segment::Parametric { curve, t0, t1, length: 0.0 };
        let panels = 64;
        let mut len = 0.0;
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let h = 1.0 / panels as f64;
            for (x, w) in GL_X.iter().zip(GL_W.iter()) {
                let tau = a + 0.5 * h * (x + 1.0);
                len += 0.5 * h * w * seg.velocity_raw(tau).norm();
            }
        }
        if let Segment::Parametric { length, .. } = &mut seg {
            *length = len;
        }
        seg
    }

    fn velocity_raw(&self, tau: f64) -> Tangent {
        match self {
            Segment::Parametric { curve, t0, t1, .. } => {
                let h = 1e-6;
                let span = t1 - t0;
                let t = t0 + tau * span;
                (curve(t + h) - curve(t - h)) * (span / (2.0 * h))
            }
            Segment::Geodesic { velocity, .. } => *velocity,
        }
    }

    pub fn point(&self, m: &Manifold, tau: f64) -> Point {
        match self {
            Segment::Geodesic { start, velocity } => m.exp_map(start, &(velocity * tau)),
            Segment::Parametric { curve, t0, t1, .. } => curve(t0 + tau * (t1 - t0)),
        }
    }

    pub fn velocity(&self, m: &Manifold, tau: f64) -> Tangent {
        match self {
            Segment::Geodesic { start, velocity } => m.exp_velocity(start, velocity, tau),
            Segment::Parametric { .. } => self.velocity_raw(tau),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Segment::Geodesic { velocity, .. } => velocity.norm(),
            Segment::Parametric { length, .. } => *length,
        }
    }

    fn reversed(&self, m: &Manifold) -> Segment {
        match self {
            Segment::Geodesic { .. } => Segment::Geodesic {
                start: self.point(m, 1.0),
                velocity: -self.velocity(m, 1.0),
            },
            Segment::Parametric { curve, t0, t1, length } => Segment::Parametric {
                curve: curve.clone(),
                t0: *t1,
                t1: *t0,
                length: *length,
            },
        }
    }
}

/// Piecewise path on a model manifold, continuous end-to-start in lifted coordinates.
#[derive(Clone, Debug)]
pub struct PathCurve {
    manifold: Manifold,
    segments: Vec<Segment>,
}

impl PathCurve {
    pub fn new(manifold: Manifold, segments: Vec<Segment>) -> Result<Self> {
        let path = PathCurve { manifold, segments };
        for w in path.segments.windows(2) {
            let gap = (w[0].point(&path.manifold, 1.0) - w[1].point(&path.manifold, 0.0)).norm();
            if gap > 1e-9 {
                return Err(GaugeError::DiscontinuousPath(gap));
            }
        }
        Ok(path)
    }

    pub fn geodesic(manifold: Manifold, start: Point, velocity: Tangent) -> Self {
        PathCurve { manifold, segments: vec![Segment::Geodesic { start, velocity }] }
    }

    /// Closed-form curve t -> f(t) on [t0, t1].
    pub fn parametric(
        manifold: Manifold,
        f: impl Fn(f64) -> Point + Send + Sync + 'static,
        t0: f64,
        t1: f64,
    ) -> Self {
        PathCurve { manifold, segments: vec![Segment::parametric(Arc::new(f), t0, t1)] }
    }

    /// Piecewise minimal geodesic through the given points, lifted continuously.
    pub fn polyline(manifold: Manifold, points: &[Point]) -> Result<Self> {
        let mut segs = Vec::new();
        let mut cur = points[0];
        for q in &points[1..] {
            let v = manifold.log_map(&cur, q)?;
            segs.push(Segment::Geodesic { start: cur, velocity: v });
            cur = manifold.exp_map(&cur, &v);
        }
        Ok(PathCurve { manifold, segments: segs })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn start(&self) -> Point {
        self.segments[0].point(&self.manifold, 0.0)
    }

    pub fn end(&self) -> Point {
        self.segments.last().expect("nonempty path").point(&self.manifold, 1.0)
    }

    pub fn reversed(&self) -> PathCurve {
        PathCurve {
            manifold: self.manifold.clone(),
            segments: self.segments.iter().rev().map(|s| s.reversed(&self.manifold)).collect(),
        }
    }

    /// This path followed by `other`.
    pub fn then(&self, other: &PathCurve) -> Result<PathCurve> {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        PathCurve::new(self.manifold.clone(), segs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::from_polar;
    use nalgebra::Vector4;
    use std::f64::consts::PI;

    #[test]
    fn parametric_length_of_equator() {
        let s = Manifold::unit_sphere();
        let p = PathCurve::parametric(s, |t| from_polar(1.0, PI / 2.0, t), 0.0, 2.0 * PI);
        assert!((p.length() - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn reversal_swaps_endpoints() {
        let s = Manifold::unit_sphere();
        let a = from_polar(1.0, 0.4, 0.2);
        let b = from_polar(1.0, 1.3, 2.0);
        let g = s.geodesic(&a, &b).unwrap();
        let r = g.reversed();
        assert!((r.start() - b).norm() < 1e-12);
        assert!((r.end() - a).norm() < 1e-12);
        assert!((r.length() - g.length()).abs() < 1e-14);
    }

    #[test]
    fn concatenation_requires_continuity() {
        let t = Manifold::torus(1.0, 1.0).unwrap();
        let a = Vector4::new(0.1, 0.1, 0.0, 0.0);
        let b = Vector4::new(0.3, 0.2, 0.0, 0.0);
        let g1 = t.geodesic(&a, &b).unwrap();
        let g2 = t.geodesic(&b, &a).unwrap();
        let loop_ = g1.then(&g2).unwrap();
        assert!((loop_.length() - 2.0 * (0.05f64).sqrt()).abs() < 1e-12);
        assert!(g1.then(&g1).is_err());
    }
}
