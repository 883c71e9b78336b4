use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{exponential_gauge, fd_log_derivative, Check, GaugeDomain, GaugeTrivialization};
use crate::bundle::{comass_norm, pullback, BundleAtlas, ComassMode, ConnectionModel, SmoothMap};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::ucalc::{CMat, C64};
use crate::util::C1Ramp;

/// Radial cutoff h as a function of the distance to the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Cutoff {
    Ramp(C1Ramp),
    Constant(f64),
}

impl Cutoff {
    pub fn value(&self, d: f64) -> f64 {
        match self {
            Cutoff::Ramp(r) => r.value(d),
            Cutoff::Constant(c) => *c,
        }
    }

    pub fn derivative(&self, d: f64) -> f64 {
        match self {
            Cutoff::Ramp(r) => r.derivative(d),
            Cutoff::Constant(_) => 0.0,
        }
    }

    pub fn slope(&self) -> f64 {
        match self {
            Cutoff::Ramp(r) => r.slope(),
            Cutoff::Constant(_) => 0.0,
        }
    }
}

/// Data for flattening a connection near a point N of the round sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenPlan {
    pub center: [f64; 4],
    pub delta: f64,
    pub tube_radius: f64,
    /// Retraction f collapsing B_{3 delta} onto the center.
    pub map: SmoothMap,
    pub cutoff: Cutoff,
    pub dh_norm: f64,
    pub df_norm: f64,
    /// Radial gauge constant C(4 delta).
    pub gauge_constant: f64,
    /// (C |dh| + 1) |df|^2
    pub constant: f64,
}

fn sup_push_norm(map: &SmoothMap) -> f64 {
    let (inner, ramp) = match map {
        SmoothMap::RadialCollapse { inner, ramp, .. } => (*inner, *ramp),
        _ => return 1.0,
    };
    // |df| is the larger of the radial stretch rho' and the angular stretch sin(rho)/sin(theta)
    let n = 4000;
    let mut best: f64 = 0.0;
    for i in 1..n {
        let theta = std::f64::consts::PI * i as f64 / n as f64;
        let (rho, drho) = SmoothMap::collapse_rho(inner, ramp, theta);
        best = best.max(drho).max(rho.sin() / theta.sin());
    }
    best
}

impl FlattenPlan {
    /// Standard plan on a round sphere: collapse B_{3 delta}, cut off over [delta, 2 delta].
    pub fn new(base: &Manifold, center: Point, delta: f64) -> Result<FlattenPlan> {
        let r = match base {
            Manifold::RoundSphere2 { radius } => *radius,
            other => return Err(GaugeError::UnsupportedGeometry(format!("flattening on {}", other.name()))),
        };
        if !(delta > 0.0 && 4.0 * delta / r < std::f64::consts::PI / 3.0) {
            return Err(GaugeError::PlanProfileInvalid(format!("tube radius 4*{delta} too large")));
        }
        let c = base.project(&center);
        let ramp = C1Ramp::new(delta, 2.0 * delta, 0.1 * delta);
        Self::with_cutoff(base, c, delta, Cutoff::Ramp(ramp))
    }

    pub fn with_cutoff(base: &Manifold, center: Point, delta: f64, cutoff: Cutoff) -> Result<FlattenPlan> {
        let r = base.sphere_radius().ok_or_else(|| GaugeError::UnsupportedGeometry(base.name()))?;
        let map = SmoothMap::RadialCollapse { center: [center[0], center[1], center[2]], inner: 3.0 * delta / r, ramp: delta / r };
        map.target(base)?;
        let dh_norm = cutoff.slope();
        let df_norm = sup_push_norm(&map);
        let gauge_constant = r * (2.0 * delta / r).tan();
        let plan = FlattenPlan {
            center: [center[0], center[1], center[2], center[3]],
            delta,
            tube_radius: 4.0 * delta,
            map,
            cutoff,
            dh_norm,
            df_norm,
            gauge_constant,
            constant: (gauge_constant * dh_norm + 1.0) * df_norm * df_norm,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// h = 0 on B_delta, h = 1 outside B_{2 delta}, and the derived constant exceeds 1.
    pub fn validate(&self) -> Result<()> {
        let d = self.delta;
        for k in 0..=20 {
            let x = (d * k as f64 / 20.0).min(d);
            if self.cutoff.value(x) != 0.0 {
                return Err(GaugeError::PlanProfileInvalid(format!("h({x:.4}) != 0 inside the inner tube")));
            }
            let y = 2.0 * d + 2.0 * d * k as f64 / 20.0;
            if self.cutoff.value(y) != 1.0 {
                return Err(GaugeError::PlanProfileInvalid(format!("h({y:.4}) != 1 outside B_2delta")));
            }
        }
        if self.constant <= 1.0 {
            return Err(GaugeError::PlanProfileInvalid(format!("derived constant {} <= 1", self.constant)));
        }
        Ok(())
    }

    pub fn center_point(&self) -> Point {
        Point::from_row_slice(&self.center)
    }

    /// f* of the bundle.
    pub fn pull(&self, b: &BundleAtlas) -> Result<BundleAtlas> {
        pullback(b, self.map.clone(), b.base())
    }
}

#[derive(Debug)]
struct FlattenedModel {
    pulled: BundleAtlas,
    gauge: GaugeTrivialization,
    center: Point,
    cutoff: Cutoff,
    inner: f64,
}

impl FlattenedModel {
    fn distance(&self, x: &Point) -> f64 {
        self.pulled.base().distance(&self.center, x)
    }

    /// dh(v)
    fn dh(&self, x: &Point, d: f64, v: &Tangent) -> f64 {
        let h1 = self.cutoff.derivative(d);
        if h1 == 0.0 || d < 1e-12 {
            return 0.0;
        }
        let m = self.pulled.base();
        let toward = match m.log_map(x, &self.center) {
            Ok(u) => u,
            Err(_) => return 0.0,
        };
        -h1 * toward.dot(v) / toward.norm()
    }

    /// Gauged form s^{-1} ds + s^{-1} A s of the pulled connection.
    fn gauged(&self, c: usize, x: &Point, v: &Tangent) -> CMat {
        if let Some(a) = self.gauge.field.gauged_form(x, v) {
            return a;
        }
        let s = self.gauge.field.value(c, x);
        let (sds, _) = fd_log_derivative(self.gauge.field.as_ref(), c, x, v);
        sds + s.adjoint() * self.pulled.form(c, x, v) * &s
    }
}

impl ConnectionModel for FlattenedModel {
    fn rank(&self) -> usize {
        self.pulled.rank()
    }

    fn form(&self, c: usize, x: &Point, v: &Tangent) -> CMat {
        let a = self.pulled.form(c, x, v);
        let d = self.distance(x);
        if d >= self.inner {
            return a;
        }
        let h = self.cutoff.value(d);
        if h == 1.0 {
            return a;
        }
        let s = self.gauge.field.value(c, x);
        a + &s * self.gauged(c, x, v) * s.adjoint() * C64::new(h - 1.0, 0.0)
    }

    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        self.pulled.transition(i, j, x)
    }

    fn curvature(&self, c: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let r = self.pulled.curvature_in(c, x, v, w).ok()?.matrix;
        let d = self.distance(x);
        if d >= self.inner {
            return Some(r);
        }
        let h = self.cutoff.value(d);
        if h == 1.0 {
            return Some(r);
        }
        let s = self.gauge.field.value(c, x);
        let av = self.gauged(c, x, v);
        let aw = self.gauged(c, x, w);
        let rg = s.adjoint() * r * &s;
        let bracket = &av * &aw - &aw * &av;
        let dh_a = &aw * C64::new(self.dh(x, d, v), 0.0) - &av * C64::new(self.dh(x, d, w), 0.0);
        let out = rg * C64::new(h, 0.0) + dh_a + bracket * C64::new(h * h - h, 0.0);
        Some(&s * out * s.adjoint())
    }

    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        self.pulled.deck(x, shift)
    }
}

/// Connection equal to the trivial one near the plan center, built from f* of `b`
/// and a certified gauge of f* b over the tube.
pub fn relative_flatten(b: &BundleAtlas, plan: &FlattenPlan, inner_gauge: &GaugeTrivialization) -> Result<BundleAtlas> {
    plan.validate()?;
    let pulled = plan.pull(b)?;
    let cert = inner_gauge.certificate.as_ref().ok_or(GaugeError::GaugeNotCertified)?;
    if !cert.holds {
        return Err(GaugeError::GaugeNotCertified);
    }
    let center = plan.center_point();
    match &inner_gauge.domain {
        GaugeDomain::Ball { center: c, radius }
            if *radius >= 3.0 * plan.delta && pulled.base().distance(&Point::from_row_slice(c), &center) < 1e-9 => {}
        _ => return Err(GaugeError::GaugeNotCertified),
    }
    if inner_gauge.field.rank() != b.rank() || inner_gauge.field.chart_count() != b.charts().len() {
        return Err(GaugeError::CoverageMismatch);
    }
    let a = inner_gauge.form_comass.value;
    let curvature = comass_norm(&pulled, ComassMode::Full, 2)?.value;
    let small = Check::new("two_a_squared_le_r", 2.0 * a * a, curvature + 1e-12);
    if !small.holds {
        return Err(GaugeError::PreconditionViolated(format!("2|A|^2 = {} exceeds |R| = {}", small.value, small.limit)));
    }
    let model = FlattenedModel {
        pulled: pulled.clone(),
        gauge: inner_gauge.clone(),
        center,
        cutoff: plan.cutoff,
        inner: 3.0 * plan.delta,
    };
    Ok(BundleAtlas::new(pulled.base().clone(), Arc::new(model), None))
}

/// Plan, inner radial gauge of f* b over B_{4 delta}, and the flattened atlas.
pub fn flatten_near_point(b: &BundleAtlas, center: Point, delta: f64) -> Result<(FlattenPlan, BundleAtlas)> {
    let plan = FlattenPlan::new(b.base(), center, delta)?;
    let pulled = plan.pull(b)?;
    let gauge = exponential_gauge(&pulled, &plan.center_point(), plan.tube_radius)?;
    let out = relative_flatten(b, &plan, &gauge)?;
    Ok((plan, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{perturb, trivial};
    use crate::geometry::from_polar;
    use crate::ucalc;

    fn north() -> Point {
        Point::new(0.0, 0.0, 1.0, 0.0)
    }

    #[test]
    fn plan_constants() {
        let p = FlattenPlan::new(&Manifold::unit_sphere(), north(), 0.2).unwrap();
        assert!(p.constant > 1.0);
        assert!((p.gauge_constant - (0.4f64).tan()).abs() < 1e-15);
        assert!(p.df_norm >= 1.0);
        assert_eq!(p.tube_radius, 0.8);
    }

    #[test]
    fn constant_profile_is_rejected() {
        let err = FlattenPlan::with_cutoff(&Manifold::unit_sphere(), north(), 0.2, Cutoff::Constant(1.0)).unwrap_err();
        assert!(matches!(err, GaugeError::PlanProfileInvalid(_)));
    }

    #[test]
    fn flat_bundle_stays_flat() {
        let b = trivial(Manifold::unit_sphere(), 2);
        let (_, out) = flatten_near_point(&b, north(), 0.2).unwrap();
        assert!(comass_norm(&out, ComassMode::Full, 2).unwrap().value < 1e-12);
    }

    #[test]
    fn perturbed_bundle_is_trivial_near_center() {
        let b = perturb(&trivial(Manifold::unit_sphere(), 2), 4, 0.1).unwrap();
        let (plan, out) = flatten_near_point(&b, north(), 0.2).unwrap();
        let r0 = comass_norm(&b, ComassMode::Full, 2).unwrap().value;
        let r1 = comass_norm(&out, ComassMode::Full, 2).unwrap().value;
        assert!(r1 <= plan.constant * r0 + 1e-4, "{r1} vs {}", plan.constant * r0);
        let m = Manifold::unit_sphere();
        for theta in [0.0, 0.05, 0.1, 0.19] {
            for phi in [0.0, 2.0, 4.0] {
                let x = from_polar(1.0, theta, phi);
                for v in m.frame(&x) {
                    assert!(ucalc::op_norm(&out.form(0, &x, &v)) < 1e-8);
                }
            }
        }
        // unchanged away from the tube
        let x = from_polar(1.0, 2.0, 1.0);
        let v = m.frame(&x)[0];
        let pulled = plan.pull(&b).unwrap();
        assert_eq!(out.form(1, &x, &v), pulled.form(1, &x, &v));
    }

    #[test]
    fn uncertified_gauge_is_rejected() {
        let b = perturb(&trivial(Manifold::unit_sphere(), 2), 4, 0.1).unwrap();
        let plan = FlattenPlan::new(b.base(), north(), 0.2).unwrap();
        let mut g = exponential_gauge(&plan.pull(&b).unwrap(), &north(), 0.8).unwrap();
        g.certificate = None;
        assert_eq!(relative_flatten(&b, &plan, &g).unwrap_err(), GaugeError::GaugeNotCertified);
    }
}
