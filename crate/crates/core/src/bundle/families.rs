use std::f64::consts::PI;
use std::sync::Arc;

use super::{BundleAtlas, ConnectionModel, Recipe};
use crate::error::Result;
use crate::geometry::{Manifold, Point, Tangent};
use crate::ucalc::{self, CMat, I};

fn planar_cross(v: &Tangent, w: &Tangent) -> f64 {
    v[0] * w[1] - v[1] * w[0]
}

/// Flat product connection d.
#[derive(Debug, Clone)]
pub struct TrivialModel {
    pub rank: usize,
}

impl ConnectionModel for TrivialModel {
    fn rank(&self) -> usize {
        self.rank
    }
    fn form(&self, _: usize, _: &Point, _: &Tangent) -> CMat {
        ucalc::zeros(self.rank)
    }
    fn curvature(&self, _: usize, _: &Point, _: &Tangent, _: &Tangent) -> Option<CMat> {
        Some(ucalc::zeros(self.rank))
    }
}

pub fn trivial(base: Manifold, rank: usize) -> BundleAtlas {
    let recipe = Recipe::Trivial { base: base.clone(), rank };
    BundleAtlas::new(base, Arc::new(TrivialModel { rank }), Some(recipe))
}

/// Degree-k line bundle on the round sphere with its rotationally symmetric
/// constant-curvature connection.  Chart 0 is the north cap, chart 1 the south cap.
#[derive(Debug, Clone)]
pub struct MonopoleModel {
    pub k: i64,
    pub radius: f64,
}

impl MonopoleModel {
    fn dphi(x: &Point, v: &Tangent) -> f64 {
        (x[0] * v[1] - x[1] * v[0]) / (x[0] * x[0] + x[1] * x[1])
    }

    fn cos_theta(x: &Point) -> f64 {
        x[2] / (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }
}

impl ConnectionModel for MonopoleModel {
    fn rank(&self) -> usize {
        1
    }

    fn form(&self, chart: usize, x: &Point, v: &Tangent) -> CMat {
        let half_k = 0.5 * self.k as f64;
        let rho2 = x[0] * x[0] + x[1] * x[1];
        let c = Self::cos_theta(x);
        // (1 -+ cos) dphi, written to stay finite at the chart's own pole
        let coef = if rho2 < 1e-300 {
            0.0
        } else if chart == 0 {
            -half_k * (1.0 - c) * Self::dphi(x, v)
        } else {
            half_k * (1.0 + c) * Self::dphi(x, v)
        };
        ucalc::scalar(I * coef)
    }

    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        let phi = x[1].atan2(x[0]);
        let e = match (i, j) {
            (0, 1) => self.k as f64 * phi,
            (1, 0) => -(self.k as f64) * phi,
            _ => 0.0,
        };
        ucalc::scalar((I * e).exp())
    }

    fn curvature(&self, _: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let n = x.xyz().normalize();
        let vt = v.xyz() - n * n.dot(&v.xyz());
        let wt = w.xyz() - n * n.dot(&w.xyz());
        let vol = n.dot(&vt.cross(&wt));
        let k = self.k as f64;
        Some(ucalc::scalar(I * (-k / (2.0 * self.radius * self.radius) * vol)))
    }
}

pub fn make_monopole(k: i64) -> BundleAtlas {
    make_monopole_on(k, 1.0)
}

pub fn make_monopole_on(k: i64, radius: f64) -> BundleAtlas {
    BundleAtlas::new(
        Manifold::RoundSphere2 { radius },
        Arc::new(MonopoleModel { k, radius }),
        Some(Recipe::Monopole { k, radius }),
    )
}

/// Abelian connection (iB/2)(x dy - y dx) with constant curvature iB dx^dy.
#[derive(Debug, Clone)]
pub struct ConstantFieldModel {
    pub field: f64,
}

impl ConnectionModel for ConstantFieldModel {
    fn rank(&self) -> usize {
        1
    }
    fn form(&self, _: usize, x: &Point, v: &Tangent) -> CMat {
        ucalc::scalar(I * (0.5 * self.field * planar_cross(x, v)))
    }
    fn curvature(&self, _: usize, _: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        Some(ucalc::scalar(I * (self.field * planar_cross(v, w))))
    }
}

pub fn constant_field(radius: f64, field: f64) -> Result<BundleAtlas> {
    let base = Manifold::ball(2, radius)?;
    Ok(BundleAtlas::new(
        base,
        Arc::new(ConstantFieldModel { field }),
        Some(Recipe::ConstantField { radius, field }),
    ))
}

/// Degree-c line bundle on the flat torus in Landau gauge A = -(2 pi i c / Area) x dy,
/// written on the lifted plane with deck transformations.
#[derive(Debug, Clone)]
pub struct TorusFluxModel {
    pub degree: i64,
    pub periods: [f64; 2],
}

impl TorusFluxModel {
    fn density(&self) -> f64 {
        2.0 * PI * self.degree as f64 / (self.periods[0] * self.periods[1])
    }
}

impl ConnectionModel for TorusFluxModel {
    fn rank(&self) -> usize {
        1
    }
    fn form(&self, _: usize, x: &Point, v: &Tangent) -> CMat {
        ucalc::scalar(I * (-self.density() * x[0] * v[1]))
    }
    fn curvature(&self, _: usize, _: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        Some(ucalc::scalar(I * (-self.density() * planar_cross(v, w))))
    }
    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        let phase = -2.0 * PI * self.degree as f64 * shift[0] as f64 * x[1] / self.periods[1];
        ucalc::scalar((I * phase).exp())
    }
}

pub fn torus_flux(periods: [f64; 2], degree: i64) -> Result<BundleAtlas> {
    let base = Manifold::torus(periods[0], periods[1])?;
    Ok(BundleAtlas::new(
        base,
        Arc::new(TorusFluxModel { degree, periods }),
        Some(Recipe::TorusFlux { periods, degree }),
    ))
}

/// Flat connection i (theta / L) dt on the trivial line bundle over a circle of length L.
#[derive(Debug, Clone)]
pub struct FlatCircleModel {
    pub theta: f64,
    pub length: f64,
}

impl ConnectionModel for FlatCircleModel {
    fn rank(&self) -> usize {
        1
    }
    fn form(&self, _: usize, _: &Point, v: &Tangent) -> CMat {
        ucalc::scalar(I * (self.theta / self.length * v[0]))
    }
    fn curvature(&self, _: usize, _: &Point, _: &Tangent, _: &Tangent) -> Option<CMat> {
        Some(ucalc::zeros(1))
    }
}

pub fn flat_circle(length: f64, theta: f64) -> Result<BundleAtlas> {
    let base = Manifold::circle(length)?;
    Ok(BundleAtlas::new(
        base,
        Arc::new(FlatCircleModel { theta, length }),
        Some(Recipe::FlatCircle { length, theta }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{chern_number_c1, comass_norm, ComassMode};
    use crate::geometry::Manifold;
    use crate::ucalc::C64;
    use nalgebra::Vector4;

    #[test]
    fn monopole_atlas_invariants() {
        for k in [-2, 1, 3] {
            let b = make_monopole(k);
            let (cocycle, compat) = b.check_invariants(2);
            assert!(cocycle < 1e-12, "{cocycle}");
            assert!(compat < 1e-6, "{compat}");
        }
    }

    #[test]
    fn monopole_comass_and_c1() {
        for k in -3..=3 {
            let b = make_monopole(k);
            let c = comass_norm(&b, ComassMode::Full, 2).unwrap();
            assert!((c.value - k.abs() as f64 / 2.0).abs() < 1e-12);
            let c1 = chern_number_c1(&b, 3).unwrap();
            assert!((c1 - k as f64).abs() < 1e-6, "k={k}: {c1}");
        }
    }

    #[test]
    fn monopole_fd_curvature_matches_analytic() {
        let b = make_monopole(1);
        for s in Manifold::unit_sphere().sample_frames(2) {
            let c = b.chart_for(&s.point).unwrap();
            let fd = b.curvature_fd(c, &s.point, &s.frame[0], &s.frame[1]);
            let an = b.curvature_in(c, &s.point, &s.frame[0], &s.frame[1]).unwrap().matrix;
            assert!(ucalc::op_norm(&(fd - an)) < 1e-6);
        }
    }

    #[test]
    fn scaled_sphere_monopole() {
        let b = make_monopole_on(1, 2.0);
        let c = comass_norm(&b, ComassMode::Full, 2).unwrap();
        assert!((c.value - 0.125).abs() < 1e-12);
        assert!((chern_number_c1(&b, 3).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn torus_flux_c1_and_comass() {
        let b = torus_flux([1.0, 2.0], 1).unwrap();
        assert!((chern_number_c1(&b, 2).unwrap() - 1.0).abs() < 1e-10);
        let c = comass_norm(&b, ComassMode::Full, 1).unwrap();
        assert!((c.value - PI).abs() < 1e-12);
    }

    #[test]
    fn torus_deck_is_compatible_with_forms() {
        let m = TorusFluxModel { degree: 2, periods: [1.0, 1.5] };
        let x = Vector4::new(0.3, 0.7, 0.0, 0.0);
        let shifted = x + Vector4::new(1.0, 0.0, 0.0, 0.0);
        let v = Vector4::new(0.2, -0.4, 0.0, 0.0);
        let h = 1e-6;
        let d = |p: &Point| m.deck(p, [1, 0]);
        let dd = (d(&(x + v * h)) - d(&(x - v * h))) * C64::new(0.5 / h, 0.0);
        let want = d(&x).adjoint() * dd + m.form(0, &x, &v);
        assert!(ucalc::op_norm(&(m.form(0, &shifted, &v) - want)) < 1e-8);
    }
}
