use std::f64::consts::PI;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::mesh::{icosphere, SimplicialComplex};
use super::path::PathCurve;
use crate::error::{GaugeError, Result};

/// Points are stored in ambient (or lifted, for periodic factors) coordinates.
/// Sphere points live in the first three slots, torus points in the first two,
/// a bare circle uses slot 0 and the circle factor of a product uses slot 3.
pub type Point = Vector4<f64>;
pub type Tangent = Vector4<f64>;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    Circle { length: f64 },
    EuclideanBall { dimension: usize, radius: f64 },
    RoundSphere2 { radius: f64 },
    FlatTorus2 { periods: [f64; 2] },
    ProductWithCircle { base: Box<Manifold>, length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub name: String,
    pub center: Point,
    /// Geodesic radius of the chart domain; infinite for global (lifted) charts.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub point: Point,
    pub frame: Vec<Tangent>,
    /// Number of leading frame vectors that belong to the base factor.
    pub base_dims: usize,
    /// Member of the next-coarser sample set.
    pub coarse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleArea {
    pub area: f64,
    pub degenerate: bool,
}

fn v3(x: &Point) -> Vector3<f64> {
    Vector3::new(x[0], x[1], x[2])
}

fn lift3(v: Vector3<f64>, t: f64) -> Point {
    Vector4::new(v[0], v[1], v[2], t)
}

fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

impl Manifold {
    pub fn circle(length: f64) -> Result<Self> {
        let m = Manifold::Circle { length };
        m.validate()?;
        Ok(m)
    }

    pub fn ball(dimension: usize, radius: f64) -> Result<Self> {
        let m = Manifold::EuclideanBall { dimension, radius };
        m.validate()?;
        Ok(m)
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        let m = Manifold::RoundSphere2 { radius };
        m.validate()?;
        Ok(m)
    }

    pub fn unit_sphere() -> Self {
        Manifold::RoundSphere2 { radius: 1.0 }
    }

    pub fn torus(l1: f64, l2: f64) -> Result<Self> {
        let m = Manifold::FlatTorus2 { periods: [l1, l2] };
        m.validate()?;
        Ok(m)
    }

    pub fn product(base: Manifold, length: f64) -> Result<Self> {
        let m = Manifold::ProductWithCircle { base: Box::new(base), length };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(GaugeError::InvalidGeometry(format!("{what} must be positive, got {x}")))
            }
        };
        match self {
            Manifold::Circle { length } => pos(*length, "circle length"),
            Manifold::EuclideanBall { dimension, radius } => {
                if !(1..=3).contains(dimension) {
                    return Err(GaugeError::InvalidGeometry(format!(
                        "ball dimension {dimension} outside 1..=3"
                    )));
                }
                pos(*radius, "ball radius")
            }
            Manifold::RoundSphere2 { radius } => pos(*radius, "sphere radius"),
            Manifold::FlatTorus2 { periods } => {
                pos(periods[0], "torus period")?;
                pos(periods[1], "torus period")
            }
            Manifold::ProductWithCircle { base, length } => {
                pos(*length, "circle length")?;
                base.validate()?;
                match base.as_ref() {
                    Manifold::RoundSphere2 { .. } => Ok(()),
                    Manifold::EuclideanBall { dimension, .. } if *dimension <= 2 => Ok(()),
                    other => Err(GaugeError::UnsupportedGeometry(format!(
                        "product base {} not supported",
                        other.name()
                    ))),
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Manifold::Circle { length } => format!("S1(L={length})"),
            Manifold::EuclideanBall { dimension, radius } => format!("B{dimension}(r={radius})"),
            Manifold::RoundSphere2 { radius } => format!("S2(r={radius})"),
            Manifold::FlatTorus2 { periods } => format!("T2({},{})", periods[0], periods[1]),
            Manifold::ProductWithCircle { base, length } => format!("{}xS1(L={length})", base.name()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::Circle { .. } => 1,
            Manifold::EuclideanBall { dimension, .. } => *dimension,
            Manifold::RoundSphere2 { .. } | Manifold::FlatTorus2 { .. } => 2,
            Manifold::ProductWithCircle { base, .. } => base.dim() + 1,
        }
    }

    pub fn base(&self) -> &Manifold {
        match self {
            Manifold::ProductWithCircle { base, .. } => base,
            other => other,
        }
    }

    pub fn sphere_radius(&self) -> Option<f64> {
        match self.base() {
            Manifold::RoundSphere2 { radius } => Some(*radius),
            _ => None,
        }
    }

    pub fn is_closed_surface(&self) -> bool {
        matches!(self, Manifold::RoundSphere2 { .. } | Manifold::FlatTorus2 { .. })
    }

    /// Periodic axes with their periods, in deck-shift order.
    pub fn periods(&self) -> Vec<(usize, f64)> {
        match self {
            Manifold::Circle { length } => vec![(0, *length)],
            Manifold::FlatTorus2 { periods } => vec![(0, periods[0]), (1, periods[1])],
            Manifold::ProductWithCircle { length, .. } => vec![(3, *length)],
            _ => vec![],
        }
    }

    /// Lattice vector `n` with q = p + sum n_k L_k e_k, when one exists.
    pub fn lattice_shift(&self, p: &Point, q: &Point) -> Option<[i64; 2]> {
        let per = self.periods();
        let mut shift = [0i64; 2];
        let mut d = q - p;
        for (k, (axis, l)) in per.iter().enumerate() {
            let n = (d[*axis] / l).round();
            shift[k] = n as i64;
            d[*axis] -= n * l;
        }
        if d.norm() < 1e-7 {
            Some(shift)
        } else {
            None
        }
    }

    /// Minimal-image difference q - p on periodic axes.
    pub fn wrapped_delta(&self, p: &Point, q: &Point) -> Tangent {
        let mut d = q - p;
        for (axis, l) in self.periods() {
            d[axis] = wrap(d[axis], l);
        }
        d
    }

    /// Nearest point of the manifold; the identity on flat factors.
    pub fn project(&self, x: &Point) -> Point {
        match self.base() {
            Manifold::RoundSphere2 { radius } => {
                let b = v3(x);
                let n = b.norm();
                let b = if n > 0.0 { b * (*radius / n) } else { Vector3::new(0.0, 0.0, *radius) };
                let t = if matches!(self, Manifold::ProductWithCircle { .. }) { x[3] } else { 0.0 };
                lift3(b, t)
            }
            _ => *x,
        }
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn tangent_project(&self, x: &Point, v: &Tangent) -> Tangent {
        match self {
            Manifold::Circle { .. } => Vector4::new(v[0], 0.0, 0.0, 0.0),
            Manifold::EuclideanBall { dimension, .. } => {
                let mut out = *v;
                for k in *dimension..4 {
                    out[k] = 0.0;
                }
                out
            }
            Manifold::RoundSphere2 { .. } => {
                let n = v3(x).normalize();
                let b = v3(v);
                lift3(b - n * n.dot(&b), 0.0)
            }
            Manifold::FlatTorus2 { .. } => Vector4::new(v[0], v[1], 0.0, 0.0),
            Manifold::ProductWithCircle { base, .. } => {
                let mut out = base.tangent_project(&self.split(x).0, &self.split(v).0);
                out[3] = v[3];
                out
            }
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Manifold::Circle { length } => length / 2.0,
            Manifold::EuclideanBall { radius, .. } => *radius,
            Manifold::RoundSphere2 { radius } => PI * radius,
            Manifold::FlatTorus2 { periods } => periods[0].min(periods[1]) / 2.0,
            Manifold::ProductWithCircle { base, length } => base.injectivity_radius().min(length / 2.0),
        }
    }

    pub fn area(&self) -> Result<f64> {
        match self {
            Manifold::RoundSphere2 { radius } => Ok(4.0 * PI * radius * radius),
            Manifold::FlatTorus2 { periods } => Ok(periods[0] * periods[1]),
            _ => Err(GaugeError::NonClosedSurface),
        }
    }

    fn split(&self, x: &Point) -> (Point, f64) {
        match self {
            Manifold::ProductWithCircle { .. } => (Vector4::new(x[0], x[1], x[2], 0.0), x[3]),
            _ => (*x, 0.0),
        }
    }

    /// Base-factor component of a point or vector (the identity off products).
    pub fn base_part(&self, x: &Point) -> Point {
        self.split(x).0
    }

    /// Riemannian exponential map; on periodic factors this is the lifted straight line.
    pub fn exp_map(&self, p: &Point, v: &Tangent) -> Point {
        match self {
            Manifold::RoundSphere2 { radius } => sphere_exp(*radius, p, v),
            Manifold::ProductWithCircle { base, .. } => {
                let (pb, t) = self.split(p);
                let (vb, vt) = self.split(v);
                let mut q = base.exp_map(&pb, &vb);
                q[3] = t + vt;
                q
            }
            _ => p + v,
        }
    }

    /// d/dtau exp_p(tau v).
    pub fn exp_velocity(&self, p: &Point, v: &Tangent, tau: f64) -> Tangent {
        match self {
            Manifold::RoundSphere2 { radius } => {
                let pn = v3(p).normalize();
                let vv = v3(v);
                let len = vv.norm();
                if len == 0.0 {
                    return Vector4::zeros();
                }
                let u = vv / len;
                let a = tau * len / radius;
                lift3((u * a.cos() - pn * a.sin()) * len, 0.0)
            }
            Manifold::ProductWithCircle { base, .. } => {
                let (pb, _) = self.split(p);
                let (vb, vt) = self.split(v);
                let mut w = base.exp_velocity(&pb, &vb, tau);
                w[3] = vt;
                w
            }
            _ => *v,
        }
    }

    /// Initial velocity of the minimal geodesic from p to q.
    pub fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        match self {
            Manifold::RoundSphere2 { radius } => {
                let a = v3(p).normalize();
                let b = v3(q).normalize();
                let cross = a.cross(&b).norm();
                let dot = a.dot(&b);
                let theta = cross.atan2(dot);
                if theta < 1e-15 {
                    return Ok(Vector4::zeros());
                }
                if PI - theta < 1e-9 {
                    return Err(GaugeError::NonUniqueGeodesic);
                }
                let u = (b - a * dot).normalize();
                Ok(lift3(u * (theta * radius), 0.0))
            }
            Manifold::FlatTorus2 { periods } => {
                let d = q - p;
                let mut out = Vector4::zeros();
                for k in 0..2 {
                    let w = wrap(d[k], periods[k]);
                    if (w.abs() - periods[k] / 2.0).abs() < TIE_TOL * periods[k] {
                        return Err(GaugeError::NonUniqueGeodesic);
                    }
                    out[k] = w;
                }
                Ok(out)
            }
            Manifold::Circle { length } => {
                let w = wrap(q[0] - p[0], *length);
                if (w.abs() - length / 2.0).abs() < TIE_TOL * length {
                    return Err(GaugeError::NonUniqueGeodesic);
                }
                Ok(Vector4::new(w, 0.0, 0.0, 0.0))
            }
            Manifold::EuclideanBall { .. } => Ok(q - p),
            Manifold::ProductWithCircle { base, length } => {
                let (pb, pt) = self.split(p);
                let (qb, qt) = self.split(q);
                let mut v = base.log_map(&pb, &qb)?;
                let w = wrap(qt - pt, *length);
                if (w.abs() - length / 2.0).abs() < TIE_TOL * length {
                    return Err(GaugeError::NonUniqueGeodesic);
                }
                v[3] = w;
                Ok(v)
            }
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match self {
            Manifold::RoundSphere2 { radius } => {
                let a = v3(p).normalize();
                let b = v3(q).normalize();
                radius * a.cross(&b).norm().atan2(a.dot(&b))
            }
            Manifold::ProductWithCircle { base, length } => {
                let (pb, pt) = self.split(p);
                let (qb, qt) = self.split(q);
                let db = base.distance(&pb, &qb);
                let dt = wrap(qt - pt, *length);
                (db * db + dt * dt).sqrt()
            }
            _ => self.wrapped_delta(p, q).norm(),
        }
    }

    pub fn geodesic(&self, p: &Point, q: &Point) -> Result<PathCurve> {
        let v = self.log_map(p, q)?;
        let d = v.norm();
        let inj = self.injectivity_radius();
        if d >= inj && !matches!(self, Manifold::EuclideanBall { .. }) {
            return Err(GaugeError::BeyondInjectivityRadius { distance: d, radius: inj });
        }
        Ok(PathCurve::geodesic(self.clone(), *p, v))
    }

    /// Orthonormal tangent frame at x; base directions first.
    pub fn frame(&self, x: &Point) -> Vec<Tangent> {
        match self {
            Manifold::Circle { .. } => vec![Vector4::new(1.0, 0.0, 0.0, 0.0)],
            Manifold::EuclideanBall { dimension, .. } => {
                (0..*dimension).map(unit).collect()
            }
            Manifold::FlatTorus2 { .. } => vec![unit(0), unit(1)],
            Manifold::RoundSphere2 { .. } => {
                let (e1, e2) = sphere_frame(&v3(x));
                vec![lift3(e1, 0.0), lift3(e2, 0.0)]
            }
            Manifold::ProductWithCircle { base, .. } => {
                let mut f = base.frame(&self.split(x).0);
                f.push(unit(3));
                f
            }
        }
    }

    pub fn base_dims(&self) -> usize {
        self.base().dim()
    }

    /// Nested, deterministic quasi-uniform samples with tangent frames.
    pub fn sample_frames(&self, resolution: usize) -> Vec<FrameSample> {
        let res = resolution.max(1);
        let base_dims = self.base_dims();
        let mk = |point: Point, coarse: bool| FrameSample {
            frame: self.frame(&point),
            point,
            base_dims,
            coarse,
        };
        match self {
            Manifold::Circle { length } => (0..res)
                .map(|k| mk(Vector4::new(*length * k as f64 / res as f64, 0.0, 0.0, 0.0), k % 2 == 0))
                .collect(),
            Manifold::FlatTorus2 { periods } => {
                let n = 4 * res;
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let p = Vector4::new(
                            periods[0] * i as f64 / n as f64,
                            periods[1] * j as f64 / n as f64,
                            0.0,
                            0.0,
                        );
                        out.push(mk(p, i % 2 == 0 && j % 2 == 0));
                    }
                }
                out
            }
            Manifold::RoundSphere2 { radius } => {
                let level = res - 1;
                let (verts, _) = icosphere(level);
                let coarse_count = if level == 0 { verts.len() } else { 10 * 4usize.pow(level as u32 - 1) + 2 };
                verts
                    .iter()
                    .enumerate()
                    .map(|(k, v)| mk(lift3(*v * *radius, 0.0), k < coarse_count))
                    .collect()
            }
            Manifold::EuclideanBall { dimension, radius } => {
                let n = 2 * res as i64;
                let h = radius / n as f64;
                let mut out = Vec::new();
                let range = -n..=n;
                let zr = |d: usize| if *dimension > d { -n..=n } else { 0..=0 };
                for i in range.clone() {
                    for j in zr(1) {
                        for k in zr(2) {
                            let p = Vector4::new(i as f64 * h, j as f64 * h, k as f64 * h, 0.0);
                            if p.norm() <= radius * (1.0 + 1e-12) {
                                out.push(mk(p, i % 2 == 0 && j % 2 == 0 && k % 2 == 0));
                            }
                        }
                    }
                }
                out
            }
            Manifold::ProductWithCircle { base, length } => {
                let nt = 4 * res;
                let bs = base.sample_frames(res);
                let mut out = Vec::with_capacity(bs.len() * nt);
                for b in &bs {
                    for k in 0..nt {
                        let mut p = b.point;
                        p[3] = length * k as f64 / nt as f64;
                        out.push(mk(p, b.coarse && k % 2 == 0));
                    }
                }
                out
            }
        }
    }

    /// Chart domains: two antipodal polar caps of radius 2pi/3 on the sphere,
    /// a single lifted chart otherwise.
    pub fn charts(&self) -> Vec<ChartSpec> {
        match self.sphere_radius() {
            Some(r) => vec![
                ChartSpec {
                    name: "north".into(),
                    center: Vector4::new(0.0, 0.0, r, 0.0),
                    radius: 2.0 * PI / 3.0 * r,
                },
                ChartSpec {
                    name: "south".into(),
                    center: Vector4::new(0.0, 0.0, -r, 0.0),
                    radius: 2.0 * PI / 3.0 * r,
                },
            ],
            None => vec![ChartSpec {
                name: "global".into(),
                center: Vector4::zeros(),
                radius: f64::INFINITY,
            }],
        }
    }

    /// Distance from x to the boundary of chart `i` (positive inside).
    pub fn chart_depth(&self, chart: &ChartSpec, x: &Point) -> f64 {
        if chart.radius.is_infinite() {
            return f64::INFINITY;
        }
        let (xb, _) = self.split(x);
        let (cb, _) = self.split(&chart.center);
        chart.radius - self.base().distance(&cb, &xb)
    }

    pub fn best_chart(&self, x: &Point) -> usize {
        let charts = self.charts();
        let mut best = 0;
        let mut depth = f64::NEG_INFINITY;
        for (i, c) in charts.iter().enumerate() {
            let d = self.chart_depth(c, x);
            if d > depth {
                depth = d;
                best = i;
            }
        }
        best
    }

    /// Area of the geodesic triangle xyz.
    pub fn triangle_area(&self, x: &Point, y: &Point, z: &Point) -> Result<TriangleArea> {
        match self {
            Manifold::RoundSphere2 { radius } => {
                let a = v3(x).normalize();
                let b = v3(y).normalize();
                let c = v3(z).normalize();
                let triple = a.dot(&b.cross(&c)).abs();
                if triple < 1e-14 {
                    return Ok(TriangleArea { area: 0.0, degenerate: true });
                }
                let angle = |p: &Vector3<f64>, q: &Vector3<f64>, r: &Vector3<f64>| {
                    let tq = q - p * p.dot(q);
                    let tr = r - p * p.dot(r);
                    tq.cross(&tr).norm().atan2(tq.dot(&tr))
                };
                let excess = angle(&a, &b, &c) + angle(&b, &c, &a) + angle(&c, &a, &b) - PI;
                Ok(TriangleArea { area: excess.max(0.0) * radius * radius, degenerate: false })
            }
            Manifold::EuclideanBall { .. } | Manifold::FlatTorus2 { .. } => {
                let u = v3(&self.wrapped_delta(x, y));
                let w = v3(&self.wrapped_delta(x, z));
                let area = 0.5 * u.cross(&w).norm();
                let scale = u.norm() * w.norm();
                if area <= 1e-14 * scale.max(1e-300) || area == 0.0 {
                    Ok(TriangleArea { area: 0.0, degenerate: true })
                } else {
                    Ok(TriangleArea { area, degenerate: false })
                }
            }
            _ => Err(GaugeError::UnsupportedGeometry(format!(
                "triangle area on {}",
                self.name()
            ))),
        }
    }

    pub fn triangulate(&self, level: usize) -> Result<SimplicialComplex> {
        SimplicialComplex::build(self, level)
    }
}

fn unit(k: usize) -> Tangent {
    let mut v = Vector4::zeros();
    v[k] = 1.0;
    v
}

pub(crate) fn sphere_frame(x: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = x.normalize();
    let a = if n[2].abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let e1 = (a - n * n.dot(&a)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn sphere_exp(radius: f64, p: &Point, v: &Tangent) -> Point {
    let pn = v3(p).normalize();
    let vv = v3(v);
    let len = vv.norm();
    if len == 0.0 {
        return lift3(pn * radius, 0.0);
    }
    let a = len / radius;
    lift3((pn * a.cos() + vv / len * a.sin()) * radius, 0.0)
}

/// Colatitude and longitude of a sphere point.
pub fn polar_angles(x: &Point) -> (f64, f64) {
    let b = v3(x);
    let rho = (b[0] * b[0] + b[1] * b[1]).sqrt();
    (rho.atan2(b[2]), b[1].atan2(b[0]))
}

/// Point of the radius-`r` sphere at the given colatitude and longitude.
pub fn from_polar(radius: f64, theta: f64, phi: f64) -> Point {
    Vector4::new(
        radius * theta.sin() * phi.cos(),
        radius * theta.sin() * phi.sin(),
        radius * theta.cos(),
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sphere_point(r: &mut ChaCha8Rng) -> Point {
        let z: f64 = r.gen_range(-1.0..1.0);
        let phi: f64 = r.gen_range(0.0..2.0 * PI);
        from_polar(1.0, z.acos(), phi)
    }

    #[test]
    fn geodesic_examples() {
        let s = Manifold::unit_sphere();
        let n = Vector4::new(0.0, 0.0, 1.0, 0.0);
        let q = Vector4::new(1.0, 0.0, 0.0, 0.0);
        assert!((s.geodesic(&n, &q).unwrap().length() - PI / 2.0).abs() < 1e-12);
        assert_eq!(s.geodesic(&n, &(-n)).unwrap_err(), GaugeError::NonUniqueGeodesic);
        let t = Manifold::torus(1.0, 1.0).unwrap();
        let a = Vector4::new(0.1, 0.1, 0.0, 0.0);
        let b = Vector4::new(0.9, 0.1, 0.0, 0.0);
        assert!((t.geodesic(&a, &b).unwrap().length() - 0.2).abs() < 1e-12);
        let c = Vector4::new(0.6, 0.1, 0.0, 0.0);
        assert_eq!(t.geodesic(&a, &c).unwrap_err(), GaugeError::NonUniqueGeodesic);
    }

    #[test]
    fn torus_distance_matches_lattice_brute_force() {
        let t = Manifold::torus(1.0, 2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Vector4::new(r.gen_range(0.0..1.0), r.gen_range(0.0..2.0), 0.0, 0.0);
            let q = Vector4::new(r.gen_range(0.0..1.0), r.gen_range(0.0..2.0), 0.0, 0.0);
            let mut best = f64::INFINITY;
            for i in -2..=2 {
                for j in -2..=2 {
                    let img = q + Vector4::new(i as f64, 2.0 * j as f64, 0.0, 0.0);
                    best = best.min((img - p).norm());
                }
            }
            assert!((t.distance(&p, &q) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_area_examples() {
        let b = Manifold::ball(2, 3.0).unwrap();
        let o = Vector4::zeros();
        let e1 = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let e2 = Vector4::new(0.0, 1.0, 0.0, 0.0);
        assert!((b.triangle_area(&o, &e1, &e2).unwrap().area - 0.5).abs() < 1e-15);
        let s = Manifold::unit_sphere();
        let e3 = Vector4::new(0.0, 0.0, 1.0, 0.0);
        assert!((s.triangle_area(&e1, &e2, &e3).unwrap().area - PI / 2.0).abs() < 1e-12);
        let col = b.triangle_area(&o, &e1, &(e1 * 2.0)).unwrap();
        assert!(col.degenerate && col.area == 0.0);
        let m = (e1 + e2).normalize();
        let col = s.triangle_area(&e1, &m, &e2).unwrap();
        assert!(col.degenerate && col.area == 0.0);
    }

    #[test]
    fn injectivity_radius_examples() {
        assert_eq!(Manifold::unit_sphere().injectivity_radius(), PI);
        assert_eq!(Manifold::torus(1.0, 2.0).unwrap().injectivity_radius(), 0.5);
        assert_eq!(Manifold::ball(2, 3.0).unwrap().injectivity_radius(), 3.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Manifold::circle(0.0).is_err());
        assert!(Manifold::sphere(-1.0).is_err());
        assert!(Manifold::ball(4, 1.0).is_err());
        assert!(Manifold::product(Manifold::torus(1.0, 1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn sample_counts() {
        assert!(Manifold::unit_sphere().sample_frames(1).len() >= 12);
        let c = Manifold::circle(2.0 * PI).unwrap();
        assert_eq!(c.sample_frames(7).len(), 7);
        let t = Manifold::torus(1.0, 1.0).unwrap();
        assert_eq!(t.sample_frames(4).len(), 4 * t.sample_frames(2).len());
        let s = Manifold::unit_sphere();
        let s2 = s.sample_frames(2);
        let s1 = s.sample_frames(1);
        let coarse: Vec<_> = s2.iter().filter(|f| f.coarse).map(|f| f.point).collect();
        assert_eq!(coarse, s1.iter().map(|f| f.point).collect::<Vec<_>>());
    }

    #[test]
    fn frames_are_orthonormal_and_tangent() {
        let p = Manifold::product(Manifold::unit_sphere(), 1.0).unwrap();
        for f in p.sample_frames(2) {
            for (i, a) in f.frame.iter().enumerate() {
                assert!((p.tangent_project(&f.point, a) - a).norm() < 1e-12);
                for (j, b) in f.frame.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((a.dot(b) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn log_inverts_exp_on_sphere() {
        let s = Manifold::sphere(2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = random_sphere_point(&mut r) * 2.0;
            let q = random_sphere_point(&mut r) * 2.0;
            let v = s.log_map(&p, &q).unwrap();
            assert!((s.exp_map(&p, &v) - q).norm() < 1e-10);
            assert!((v.norm() - s.distance(&p, &q)).abs() < 1e-12);
        }
    }

    #[test]
    fn best_chart_picks_nearer_pole() {
        let s = Manifold::unit_sphere();
        assert_eq!(s.best_chart(&from_polar(1.0, 0.3, 1.0)), 0);
        assert_eq!(s.best_chart(&from_polar(1.0, 2.8, 1.0)), 1);
    }
}
