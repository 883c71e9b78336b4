use std::f64::consts::PI;

use nalgebra::{Vector3, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::manifold::{sphere_frame, Manifold, Point, Tangent};
use super::path::PathCurve;
use crate::error::{GaugeError, Result};

/// Shape of a contracting homotopy c: [0,1]^2 -> M with c(0,t) = c(s,0) = c(s,1) = base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DiscShape {
    /// Nested geodesic caps of radius s*radius, all tangent at the base point;
    /// `heading` is the unit direction from the base point to the cap centers.
    Cap { radius: f64, heading: Tangent },
    /// Star-shaped region c(s,t) = exp_base(s * r(t)) with
    /// r(t) = radius sin(pi t)(1 + sum a_k sin(2 pi k t + phi_k)) (cos psi e1 + sin psi e2),
    /// psi = span * t.
    Star { e1: Tangent, e2: Tangent, radius: f64, span: f64, harmonics: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscHomotopy {
    manifold: Manifold,
    base: Point,
    shape: DiscShape,
    grid: (usize, usize),
    area: f64,
    area_error: f64,
}

fn v3(x: &Point) -> Vector3<f64> {
    Vector3::new(x[0], x[1], x[2])
}

impl DiscHomotopy {
    pub fn new(manifold: Manifold, base: Point, shape: DiscShape, grid: (usize, usize)) -> Result<Self> {
        if !matches!(
            manifold,
            Manifold::RoundSphere2 { .. } | Manifold::FlatTorus2 { .. } | Manifold::EuclideanBall { dimension: 2, .. }
        ) {
            return Err(GaugeError::UnsupportedGeometry(format!("discs on {}", manifold.name())));
        }
        if grid.0 < 2 || grid.1 < 2 {
            return Err(GaugeError::PreconditionViolated("disc grid needs at least 2x2 cells".into()));
        }
        let base = manifold.project(&base);
        let mut d = DiscHomotopy { manifold, base, shape, grid, area: 0.0, area_error: 0.0 };
        let a = d.area_on(grid.0, grid.1);
        let fine = d.area_on(2 * grid.0, 2 * grid.1);
        d.area = a;
        d.area_error = (fine - a).abs();
        Ok(d)
    }

    pub fn cap(manifold: Manifold, base: Point, heading: Tangent, radius: f64) -> Result<Self> {
        let h = manifold.tangent_project(&base, &heading);
        let h = h / h.norm();
        DiscHomotopy::new(manifold, base, DiscShape::Cap { radius, heading: h }, (128, 256))
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn shape(&self) -> &DiscShape {
        &self.shape
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    /// Trapezoidal area of the homotopy, counting multiplicity.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// |area(grid) - area(doubled grid)|.
    pub fn area_error(&self) -> f64 {
        self.area_error
    }

    pub fn eval(&self, s: f64, t: f64) -> Point {
        let m = &self.manifold;
        match &self.shape {
            DiscShape::Cap { radius, heading } => {
                let sigma = s * radius;
                let center = m.exp_map(&self.base, &(heading * sigma));
                let u = m.exp_velocity(&self.base, heading, sigma);
                let d = -u;
                let w = match m {
                    Manifold::RoundSphere2 { .. } => {
                        let n = v3(&center).normalize();
                        let c = n.cross(&v3(&d));
                        Vector4::new(c[0], c[1], c[2], 0.0)
                    }
                    _ => Vector4::new(-d[1], d[0], 0.0, 0.0),
                };
                let ang = 2.0 * PI * t;
                m.exp_map(&center, &((d * ang.cos() + w * ang.sin()) * sigma))
            }
            DiscShape::Star { e1, e2, radius, span, harmonics } => {
                let mut rho = 1.0;
                for (k, (a, ph)) in harmonics.iter().enumerate() {
                    rho += a * (2.0 * PI * (k + 1) as f64 * t + ph).sin();
                }
                rho *= radius * (PI * t).sin();
                let psi = span * t;
                m.exp_map(&self.base, &((e1 * psi.cos() + e2 * psi.sin()) * (s * rho)))
            }
        }
    }

    /// (d/ds c, d/dt c) by central differences.
    pub fn partials(&self, s: f64, t: f64) -> (Tangent, Tangent) {
        let h = 1e-6;
        let ds = (self.eval(s + h, t) - self.eval(s - h, t)) / (2.0 * h);
        let dt = (self.eval(s, t + h) - self.eval(s, t - h)) / (2.0 * h);
        (ds, dt)
    }

    fn area_on(&self, ns: usize, nt: usize) -> f64 {
        self.area_on_range(1.0, ns, nt)
    }

    /// Area of the sub-homotopy D_s = c([0, s] x [0, 1]).
    pub fn partial_area(&self, s: f64) -> f64 {
        let ns = ((self.grid.0 as f64 * s).ceil() as usize).max(2);
        self.area_on_range(s, ns, self.grid.1)
    }

    fn area_on_range(&self, s1: f64, ns: usize, nt: usize) -> f64 {
        let mut total = 0.0;
        for i in 0..=ns {
            let s = s1 * i as f64 / ns as f64;
            let ws = if i == 0 || i == ns { 0.5 } else { 1.0 };
            for j in 0..=nt {
                let t = j as f64 / nt as f64;
                let wt = if j == 0 || j == nt { 0.5 } else { 1.0 };
                let (a, b) = self.partials(s, t);
                let g = a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2);
                total += ws * wt * g.max(0.0).sqrt();
            }
        }
        total * s1 / (ns * nt) as f64
    }

    /// Grid nodes (s_i, t_j, c(s_i, t_j)).
    pub fn grid_points(&self) -> Vec<(f64, f64, Point)> {
        let (ns, nt) = self.grid;
        let mut out = Vec::with_capacity((ns + 1) * (nt + 1));
        for i in 0..=ns {
            for j in 0..=nt {
                let s = i as f64 / ns as f64;
                let t = j as f64 / nt as f64;
                out.push((s, t, self.eval(s, t)));
            }
        }
        out
    }

    /// The loop t -> c(s, t).
    pub fn loop_at(&self, s: f64) -> PathCurve {
        let me = self.clone();
        PathCurve::parametric(self.manifold.clone(), move |t| me.eval(s, t), 0.0, 1.0)
    }

    pub fn boundary(&self) -> PathCurve {
        self.loop_at(1.0)
    }

    /// Random cap or star disc of size at most `max_radius` around a random base point.
    pub fn random<R: Rng + ?Sized>(manifold: &Manifold, rng: &mut R, max_radius: f64) -> Result<Self> {
        let base = random_point(manifold, rng);
        let (e1, e2) = tangent_pair(manifold, &base);
        let ang: f64 = rng.gen_range(0.0..2.0 * PI);
        let heading = e1 * ang.cos() + e2 * ang.sin();
        let radius = rng.gen_range(0.15..1.0) * max_radius;
        let grid = (48, 96);
        if rng.gen_bool(0.5) {
            DiscHomotopy::new(manifold.clone(), base, DiscShape::Cap { radius, heading }, grid)
        } else {
            let harmonics = (0..2)
                .map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            let span = rng.gen_range(0.5..3.0);
            let f1 = heading;
            let f2 = e1 * (-ang.sin()) + e2 * ang.cos();
            DiscHomotopy::new(
                manifold.clone(),
                base,
                DiscShape::Star { e1: f1, e2: f2, radius, span, harmonics },
                grid,
            )
        }
    }
}

pub(crate) fn tangent_pair(m: &Manifold, p: &Point) -> (Tangent, Tangent) {
    match m {
        Manifold::RoundSphere2 { .. } => {
            let (a, b) = sphere_frame(&v3(p));
            (Vector4::new(a[0], a[1], a[2], 0.0), Vector4::new(b[0], b[1], b[2], 0.0))
        }
        _ => (Vector4::new(1.0, 0.0, 0.0, 0.0), Vector4::new(0.0, 1.0, 0.0, 0.0)),
    }
}

pub(crate) fn random_point<R: Rng + ?Sized>(m: &Manifold, rng: &mut R) -> Point {
    match m {
        Manifold::RoundSphere2 { radius } => {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).sqrt();
            Vector4::new(r * phi.cos(), r * phi.sin(), z, 0.0) * *radius
        }
        Manifold::FlatTorus2 { periods } => Vector4::new(
            rng.gen_range(0.0..periods[0]),
            rng.gen_range(0.0..periods[1]),
            0.0,
            0.0,
        ),
        Manifold::EuclideanBall { radius, .. } => {
            let r = radius * rng.gen_range(0.0f64..0.5).sqrt();
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            Vector4::new(r * a.cos(), r * a.sin(), 0.0, 0.0)
        }
        _ => Vector4::zeros(),
    }
}
