use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Vector3, Vector4};

use super::{form_comass, Certificate, GaugeDomain, GaugeField, GaugeTrivialization};
use crate::bundle::{BundleAtlas, ComassReport};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::transport::chart_intervals;
use crate::ucalc::{self, CMat, C64};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Gauge by parallel transport along minimal geodesics from `center`.
///
/// The gauged form is computed by integrating the transported curvature
/// against the Jacobi field of the ray family, A'(v) = int_0^1 s^{-1} R(c', J_v) s.
#[derive(Debug, Clone)]
pub struct RadialGauge {
    atlas: BundleAtlas,
    center: Point,
    center_chart: usize,
    steps: usize,
}

pub(crate) struct Ray {
    /// transport from the center (center chart) to `end` (in `chart`)
    pub s: CMat,
    pub chart: usize,
    pub end: Point,
    pub forms: Vec<CMat>,
}

impl RadialGauge {
    pub fn new(atlas: &BundleAtlas, center: Point, steps: usize) -> Result<Self> {
        let center = atlas.base().project(&center);
        let center_chart = atlas.chart_for(&center)?;
        Ok(RadialGauge { atlas: atlas.clone(), center, center_chart, steps: steps.max(2) & !1 })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn center_chart(&self) -> usize {
        self.center_chart
    }

    pub(crate) fn march(&self, x: &Point, vs: &[Tangent]) -> Result<Ray> {
        let b = &self.atlas;
        let m = b.base();
        let xp = m.project(x);
        let c0 = self.center;
        let u = m.log_map(&c0, &xp)?;
        let a = u.norm();
        let m_rank = b.rank();
        if a < 1e-14 {
            return Ok(Ray {
                s: ucalc::identity(m_rank),
                chart: self.center_chart,
                end: c0,
                forms: vs.iter().map(|_| ucalc::zeros(m_rank)).collect(),
            });
        }
        let gamma = |t: f64| m.exp_map(&c0, &(u * t));
        let dgamma = |t: f64| m.exp_velocity(&c0, &u, t);
        let end = gamma(1.0);
        let e_r = dgamma(1.0) / a;
        let radius = m.sphere_radius();
        let perps: Vec<Tangent> = vs
            .iter()
            .map(|v| {
                let vb = m.tangent_project(&end, v);
                vb - e_r * e_r.dot(&vb)
            })
            .collect();
        let profile = |t: f64| match radius {
            Some(r) => (t * a / r).sin() / (a / r).sin(),
            None => t,
        };

        let mut s = ucalc::identity(m_rank);
        let mut forms = vec![ucalc::zeros(m_rank); vs.len()];
        let n = self.steps;
        let (ga, gb) = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0);
        let mut chart = self.center_chart;
        for (t0, t1, c, next) in chart_intervals(b, gamma, 16, self.center_chart)? {
            let h = (t1 - t0) / n as f64;
            let minus_a = |t: f64| b.form(c, &gamma(t), &dgamma(t)) * C64::new(-1.0, 0.0);
            let integrand = |t: f64, s: &CMat, out: &mut Vec<CMat>, w: f64| -> Result<()> {
                let p = gamma(t);
                let dp = dgamma(t);
                for (k, perp) in perps.iter().enumerate() {
                    let j = perp * profile(t);
                    let r = b.curvature_in(c, &p, &dp, &j)?.matrix;
                    out[k] += s.adjoint() * r * s * C64::new(w, 0.0);
                }
                Ok(())
            };
            for k in 0..n {
                let tk = t0 + k as f64 * h;
                let wk = if k == 0 { h / 3.0 } else if k % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
                if !perps.is_empty() {
                    integrand(tk, &s, &mut forms, wk)?;
                }
                let ma = minus_a(tk + ga * h);
                let mb = minus_a(tk + gb * h);
                let omega = (&ma + &mb) * C64::new(0.5 * h, 0.0)
                    + (&mb * &ma - &ma * &mb) * C64::new(SQRT3 / 12.0 * h * h, 0.0);
                s = ucalc::expm(&omega) * s;
            }
            if !perps.is_empty() {
                integrand(t1, &s, &mut forms, h / 3.0)?;
            }
            s = ucalc::keep_unitary(s);
            chart = c;
            if let Some(j) = next {
                s = b.transition(j, c, &gamma(t1)) * s;
                chart = j;
            }
        }
        Ok(Ray { s, chart, end, forms })
    }
}

impl GaugeField for RadialGauge {
    fn rank(&self) -> usize {
        self.atlas.rank()
    }

    fn chart_count(&self) -> usize {
        self.atlas.charts().len()
    }

    fn value(&self, chart: usize, x: &Point) -> CMat {
        let b = &self.atlas;
        let Ok(ray) = self.march(x, &[]) else {
            return ucalc::identity(b.rank());
        };
        let mut s = if ray.chart == chart { ray.s } else { b.transition(chart, ray.chart, &ray.end) * ray.s };
        if let Some(n) = b.base().lattice_shift(&ray.end, &b.base().project(x)) {
            if n != [0, 0] {
                s = b.deck(&ray.end, n).adjoint() * s;
            }
        }
        s
    }

    fn gauged_form(&self, x: &Point, v: &Tangent) -> Option<CMat> {
        self.march(x, std::slice::from_ref(v)).ok().map(|mut r| r.forms.remove(0))
    }
}

/// C(r): form comass bound of the radial gauge on a ball of radius r per unit curvature.
pub fn exponential_gauge_constant(m: &Manifold, r: f64) -> f64 {
    match m.sphere_radius() {
        Some(rho) => rho * (r / (2.0 * rho)).tan(),
        None => r / 2.0,
    }
}

fn max_radius(m: &Manifold, center: &Point) -> Result<f64> {
    match m {
        Manifold::RoundSphere2 { radius } => Ok(PI * radius),
        Manifold::FlatTorus2 { .. } => Ok(m.injectivity_radius()),
        Manifold::EuclideanBall { radius, .. } => Ok(radius - center.norm()),
        other => Err(GaugeError::UnsupportedGeometry(format!("exponential gauge on {}", other.name()))),
    }
}

/// Unit directions at the center used to place sample points.
fn sample_directions(m: &Manifold, center: &Point) -> Vec<Tangent> {
    let frame = m.frame(center);
    match frame.len() {
        1 => vec![frame[0], -frame[0]],
        2 => (0..24)
            .map(|j| {
                let p = 2.0 * PI * j as f64 / 24.0;
                frame[0] * p.cos() + frame[1] * p.sin()
            })
            .collect(),
        _ => {
            // Fibonacci points on the unit sphere
            let n = 64;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let p = golden * k as f64;
                    let d = Vector3::new(r * p.cos(), r * p.sin(), z);
                    Vector4::new(d[0], d[1], d[2], 0.0)
                })
                .collect()
        }
    }
}

/// Radial gauge on B_r(center) with its form-comass certificate.
pub fn exponential_gauge(b: &BundleAtlas, center: &Point, r: f64) -> Result<GaugeTrivialization> {
    let m = b.base();
    let bound = max_radius(m, center)?;
    if !(r > 0.0) || r >= bound - 1e-12 {
        return Err(GaugeError::RadiusTooLarge { radius: r, bound });
    }
    let gauge = RadialGauge::new(b, *center, 96)?;
    let c0 = gauge.center();
    let rings = 12;
    let dirs = sample_directions(m, &c0);
    let mut pts: Vec<(Point, bool)> = vec![(c0, true)];
    for i in 1..=rings {
        let a = r * i as f64 / rings as f64;
        for (j, d) in dirs.iter().enumerate() {
            pts.push((m.exp_map(&c0, &(d * a)), i % 2 == 0 && j % 2 == 0));
        }
    }
    let mut form_samples = Vec::with_capacity(pts.len());
    let mut curv: f64 = 0.0;
    for (x, coarse) in &pts {
        let frame = m.frame(x);
        let ray = gauge.march(x, &frame)?;
        form_samples.push((*x, form_comass(&ray.forms), *coarse));
        curv = curv.max(b.curvature_comass_at(x, &frame)?);
    }
    let report = ComassReport::from_samples(&form_samples);
    let constant = exponential_gauge_constant(m, r);
    let theorem = if m.sphere_radius().is_some() { "exponential_gauge_sphere" } else { "exponential_gauge_euclidean" };
    let cert = Certificate::new(theorem, constant, curv, report.value, 0.05 * constant * curv + 1e-9);
    Ok(GaugeTrivialization {
        field: Arc::new(gauge),
        domain: GaugeDomain::Ball { center: [c0[0], c0[1], c0[2], c0[3]], radius: r },
        form_comass: report,
        certificate: Some(cert),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{constant_field, make_monopole, perturb, trivial};
    use crate::gauge::apply_gauge;
    use crate::geometry::from_polar;

    fn north() -> Point {
        Vector4::new(0.0, 0.0, 1.0, 0.0)
    }

    #[test]
    fn flat_bundle_has_zero_gauged_form() {
        let g = exponential_gauge(&trivial(Manifold::unit_sphere(), 2), &north(), 1.0).unwrap();
        assert!(g.form_comass.value < 1e-14);
    }

    #[test]
    fn monopole_saturates_tan_half_angle() {
        for k in [1i64, 2] {
            let b = make_monopole(k);
            let g = RadialGauge::new(&b, north(), 96).unwrap();
            for a in [0.3, 1.0, 1.8, 2.0 * PI / 3.0] {
                let x = from_polar(1.0, a, 0.7);
                let f = Manifold::unit_sphere().frame(&x);
                let ray = g.march(&x, &f).unwrap();
                let ratio = form_comass(&ray.forms) / (0.5 * k as f64 * (a / 2.0).tan());
                assert!((ratio - 1.0).abs() < 1e-4, "k={k} a={a}: {ratio}");
            }
        }
    }

    #[test]
    fn euclidean_constant_field_boundary_comass() {
        for r in [0.5, 1.0, 2.0] {
            let b = constant_field(2.5, 0.8).unwrap();
            let g = exponential_gauge(&b, &Vector4::zeros(), r).unwrap();
            let c = g.certificate.unwrap();
            assert!((c.measured / c.curvature_norm / (r / 2.0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_constant_at_two_thirds_pi_is_sqrt3() {
        let c = exponential_gauge_constant(&Manifold::unit_sphere(), 2.0 * PI / 3.0);
        assert!((c - 3f64.sqrt()).abs() < 1e-12);
        let err = exponential_gauge(&make_monopole(1), &north(), PI).unwrap_err();
        assert!(matches!(err, GaugeError::RadiusTooLarge { .. }));
    }

    #[test]
    fn applied_radial_gauge_matches_analytic_form() {
        // A' = -(i k / 2)(1 - cos a) dphi around the north pole
        let b = make_monopole(1);
        let g = exponential_gauge(&b, &north(), 2.0).unwrap();
        let gb = apply_gauge(&b, &g).unwrap();
        for (a, phi) in [(0.4, 0.1), (1.2, 2.0), (1.9, -1.0)] {
            let x = from_polar(1.0, a, phi);
            let e_phi = Vector4::new(-phi.sin(), phi.cos(), 0.0, 0.0);
            let e_a = Vector4::new(a.cos() * phi.cos(), a.cos() * phi.sin(), -a.sin(), 0.0);
            let c = gb.chart_for(&x).unwrap();
            let want = C64::new(0.0, -0.5 * (1.0 - a.cos()) / a.sin());
            assert!((gb.form(c, &x, &e_phi)[(0, 0)] - want).norm() < 1e-6);
            // radial directions are killed
            assert!(gb.form(c, &x, &e_a)[(0, 0)].norm() < 1e-7);
        }
    }

    #[test]
    fn certificate_holds_on_perturbed_bundles() {
        let b = perturb(&trivial(Manifold::unit_sphere(), 2), 21, 0.3).unwrap();
        let g = exponential_gauge(&b, &from_polar(1.0, 0.9, 0.3), 2.0).unwrap();
        let c = g.certificate.as_ref().unwrap();
        assert!(c.holds, "{c:?}");
        assert!(g.overlap_mismatch(&b, 2) < 1e-6);
        // ray integral against finite differences of the transport
        let gb = apply_gauge(&b, &g).unwrap();
        let x = from_polar(1.0, 1.6, 1.1);
        let v = Manifold::unit_sphere().frame(&x)[1];
        let c = gb.chart_for(&x).unwrap();
        let fd = gb.form(c, &x, &v);
        let ray = g.field.gauged_form(&x, &v).unwrap();
        assert!(ucalc::op_norm(&(fd - ray)) < 1e-6);
    }
}
