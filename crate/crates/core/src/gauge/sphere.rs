use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector4;

use super::radial::RadialGauge;
use super::{form_comass, Certificate, Check, GaugeDomain, GaugeField, GaugeTrivialization};
use crate::bundle::{comass_norm, BundleAtlas, ComassMode, ComassReport};
use crate::error::{GaugeError, Result};
use crate::geometry::{from_polar, Manifold, Point, Tangent};
use crate::ucalc::{self, CMat, C64};
use crate::util::C1Ramp;

/// Curvature comass below which the glued trivialization is constructed.
pub const SPHERE_THRESHOLD: f64 = 1.0 / 13.0;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const RAY_STEPS: usize = 48;

/// Cutoff profile in the colatitude theta: chi = 1 - ramp(theta), so chi = 1 for
/// theta <= pi/3 + eps and chi = 0 for theta >= 2pi/3, with
/// |d chi| <= 1/(pi/3 - eps) + eps.
pub fn sphere_cutoff(eps: f64) -> C1Ramp {
    let l = PI / 3.0 - eps;
    let w = 0.5 * eps * l * l / (1.0 + eps * l);
    C1Ramp::new(PI / 3.0 + eps, 2.0 * PI / 3.0, w)
}

/// The glued two-chart trivialization Phi = {Psi_1, alpha_2 Psi_2} of a bundle on the unit sphere.
#[derive(Debug, Clone)]
pub struct SphereGlue {
    atlas: BundleAtlas,
    psi1: RadialGauge,
    psi2: RadialGauge,
    /// transport along the meridian phi = 0 from the south pole (chart 1) to the north pole (chart 0)
    k: CMat,
    ramp: C1Ramp,
    split: f64,
}

struct Local {
    theta: f64,
    s1: CMat,
    s2: CMat,
}

fn colatitude(y: &Point) -> f64 {
    let n = y.xyz().norm();
    (y[2] / n).clamp(-1.0, 1.0).acos()
}

impl SphereGlue {
    pub fn new(b: &BundleAtlas, eps: f64) -> Result<Self> {
        if b.base().sphere_radius() != Some(1.0) || !matches!(b.base(), Manifold::RoundSphere2 { .. }) {
            return Err(GaugeError::UnsupportedGeometry(format!("two-chart gluing on {}", b.base().name())));
        }
        if !(eps > 0.0 && eps < PI / 6.0) {
            return Err(GaugeError::PreconditionViolated(format!("cutoff width {eps}")));
        }
        let psi1 = RadialGauge::new(b, Vector4::new(0.0, 0.0, 1.0, 0.0), RAY_STEPS)?;
        let psi2 = RadialGauge::new(b, Vector4::new(0.0, 0.0, -1.0, 0.0), RAY_STEPS)?;
        // transport south -> equator -> north along the meridian phi = 0
        let e = from_polar(1.0, PI / 2.0, 0.0);
        let c = b.base().best_chart(&e);
        let k = psi1.value(c, &e).adjoint() * psi2.value(c, &e);
        Ok(SphereGlue { atlas: b.clone(), psi1, psi2, k, ramp: sphere_cutoff(eps), split: PI / 3.0 + eps / 2.0 })
    }

    pub fn cutoff(&self) -> C1Ramp {
        self.ramp
    }

    fn chi(&self, theta: f64) -> f64 {
        1.0 - self.ramp.value(theta)
    }

    /// d chi(v) on the unit sphere.
    fn dchi(&self, theta: f64, v: &Tangent) -> f64 {
        let d = self.ramp.derivative(theta);
        if d == 0.0 {
            return 0.0;
        }
        let dtheta = -v[2] / theta.sin();
        -d * dtheta
    }

    fn local(&self, chart: usize, y: &Point) -> Local {
        let theta = colatitude(y);
        let s1 = self.psi1.value(chart, y);
        let s2 = self.psi2.value(chart, y) * self.k.adjoint();
        Local { theta, s1, s2 }
    }

    /// g_12 = Psi_1 Psi_2^{-1} at y.
    pub fn g12(&self, y: &Point) -> CMat {
        let l = self.local(self.atlas.base().best_chart(y), y);
        l.s1.adjoint() * l.s2
    }

    fn alpha(&self, l: &Local) -> Result<CMat> {
        if l.theta >= 2.0 * PI / 3.0 {
            return Ok(ucalc::identity(self.atlas.rank()));
        }
        let g = l.s1.adjoint() * &l.s2;
        let log = ucalc::logm_unitary(&g).map_err(|e| match e {
            GaugeError::OutsideLogDomain(d) => GaugeError::LogDomainError(d),
            other => other,
        })?;
        Ok(ucalc::expm(&(log * C64::new(self.chi(l.theta), 0.0))))
    }

    /// Gauged forms (Psi_1 form, Psi_2 form) at y on the given vectors.
    fn chart_forms(&self, y: &Point, vs: &[Tangent]) -> Result<(Vec<CMat>, Vec<CMat>)> {
        let a1 = self.psi1.march(y, vs)?.forms;
        let a2 = self
            .psi2
            .march(y, vs)?
            .forms
            .into_iter()
            .map(|f| &self.k * f * self.k.adjoint())
            .collect();
        Ok((a1, a2))
    }

    /// Glued gauged form on the vectors `vs` at y, plus diagnostics of the gluing step.
    fn glued_forms(&self, y: &Point, vs: &[Tangent]) -> Result<(Vec<CMat>, Option<GlueDiagnostics>)> {
        let theta = colatitude(y);
        if theta < self.split {
            return Ok((self.psi1.march(y, vs)?.forms, None));
        }
        if theta >= 2.0 * PI / 3.0 {
            let a2 = self
                .psi2
                .march(y, vs)?
                .forms
                .into_iter()
                .map(|f| &self.k * f * self.k.adjoint())
                .collect();
            return Ok((a2, None));
        }
        let l = self.local(self.atlas.base().best_chart(y), y);
        let (a1, a2) = self.chart_forms(y, vs)?;
        let g = l.s1.adjoint() * &l.s2;
        let log = ucalc::logm_unitary(&g).map_err(|e| match e {
            GaugeError::OutsideLogDomain(d) => GaugeError::LogDomainError(d),
            other => other,
        })?;
        let chi = self.chi(theta);
        let x = &log * C64::new(chi, 0.0);
        let alpha = ucalc::expm(&x);
        let mut out = Vec::with_capacity(vs.len());
        let mut diag = GlueDiagnostics::default();
        let mut dg_all = Vec::new();
        let mut dalpha_all = Vec::new();
        for (k, v) in vs.iter().enumerate() {
            let dg = &g * &a2[k] - &a1[k] * &g;
            let dlog = ucalc::dexp_inverse(&log, &dg)?;
            let dx = &log * C64::new(self.dchi(theta, v), 0.0) + &dlog * C64::new(chi, 0.0);
            let dalpha = ucalc::dexp(&x, &dx);
            diag.dexp_ratio = diag.dexp_ratio.max(ratio(&dalpha, &dx));
            diag.dlog_ratio = diag.dlog_ratio.max(ratio(&dlog, &dg));
            out.push(&alpha * &a2[k] * alpha.adjoint() - &dalpha * alpha.adjoint());
            dg_all.push(dg);
            dalpha_all.push(dalpha);
        }
        diag.dg = form_comass(&dg_all);
        diag.dalpha = form_comass(&dalpha_all);
        diag.log_norm = ucalc::op_norm(&log);
        diag.g_dist = ucalc::op_norm(&(&g - ucalc::identity(g.nrows())));
        diag.a1 = form_comass(&a1);
        diag.a2 = form_comass(&a2);
        Ok((out, Some(diag)))
    }
}

fn ratio(num: &CMat, den: &CMat) -> f64 {
    let d = ucalc::op_norm(den);
    if d < 1e-300 {
        0.0
    } else {
        ucalc::op_norm(num) / d
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct GlueDiagnostics {
    g_dist: f64,
    log_norm: f64,
    dg: f64,
    dalpha: f64,
    dexp_ratio: f64,
    dlog_ratio: f64,
    a1: f64,
    a2: f64,
}

impl GaugeField for SphereGlue {
    fn rank(&self) -> usize {
        self.atlas.rank()
    }

    fn chart_count(&self) -> usize {
        2
    }

    fn value(&self, chart: usize, y: &Point) -> CMat {
        let l = self.local(chart, y);
        if l.theta < self.split {
            return l.s1;
        }
        match self.alpha(&l) {
            Ok(a) => l.s2 * a.adjoint(),
            Err(_) => l.s2,
        }
    }

    fn gauged_form(&self, y: &Point, v: &Tangent) -> Option<CMat> {
        self.glued_forms(y, std::slice::from_ref(v)).ok().map(|(mut f, _)| f.remove(0))
    }
}

/// Sample points: an icosphere plus rings through the gluing band.
fn glue_samples() -> Vec<(Point, bool)> {
    let m = Manifold::unit_sphere();
    let mut pts: Vec<(Point, bool)> = m.sample_frames(3).into_iter().map(|s| (s.point, s.coarse)).collect();
    for i in 0..6 {
        let theta = PI / 3.0 + (i as f64 + 0.5) * (PI / 3.0) / 6.0;
        for j in 0..24 {
            pts.push((from_polar(1.0, theta, 2.0 * PI * (j as f64 + 0.25) / 24.0), false));
        }
    }
    pts
}

/// Global trivialization of a bundle on the unit sphere with small curvature.
pub fn sphere_two_chart_trivialize(b: &BundleAtlas, eps: f64) -> Result<GaugeTrivialization> {
    let curvature = comass_norm(b, ComassMode::Full, 3)?.value;
    sphere_trivialize_with(b, eps, curvature)
}

pub(crate) fn sphere_trivialize_with(b: &BundleAtlas, eps: f64, curvature: f64) -> Result<GaugeTrivialization> {
    if curvature >= SPHERE_THRESHOLD {
        return Err(GaugeError::CurvatureTooLarge(curvature));
    }
    let glue = SphereGlue::new(b, eps)?;
    let m = Manifold::unit_sphere();
    let mut samples = Vec::new();
    let mut worst = GlueDiagnostics::default();
    let mut consistency: f64 = 0.0;
    let mut slope: f64 = 0.0;
    for (y, coarse) in glue_samples() {
        let frame = m.frame(&y);
        let (forms, diag) = glue.glued_forms(&y, &frame)?;
        samples.push((y, form_comass(&forms), coarse));
        let theta = colatitude(&y);
        for v in &frame {
            slope = slope.max(glue.dchi(theta, v).abs());
        }
        if let Some(d) = diag {
            worst.g_dist = worst.g_dist.max(d.g_dist);
            worst.log_norm = worst.log_norm.max(d.log_norm);
            worst.dg = worst.dg.max(d.dg);
            worst.dalpha = worst.dalpha.max(d.dalpha);
            worst.dexp_ratio = worst.dexp_ratio.max(d.dexp_ratio);
            worst.dlog_ratio = worst.dlog_ratio.max(d.dlog_ratio);
            worst.a1 = worst.a1.max(d.a1);
            worst.a2 = worst.a2.max(d.a2);
        }
        if theta > PI / 3.0 && theta < PI / 3.0 + eps {
            // Phi_1 and Phi_2 agree where chi = 1
            let c = b.base().best_chart(&y);
            let l = glue.local(c, &y);
            let a = glue.alpha(&l)?;
            consistency = consistency.max(ucalc::op_norm(&(&l.s1 - &l.s2 * a.adjoint())));
        }
    }
    // consistency samples strictly inside the chi = 1 band
    for j in 0..24 {
        let y = from_polar(1.0, PI / 3.0 + 0.5 * eps, 2.0 * PI * j as f64 / 24.0);
        let l = glue.local(b.base().best_chart(&y), &y);
        let a = glue.alpha(&l)?;
        consistency = consistency.max(ucalc::op_norm(&(&l.s1 - &l.s2 * a.adjoint())));
    }
    if worst.g_dist >= 2.0 * (0.25f64).sin() {
        return Err(GaugeError::LogDomainError(worst.g_dist));
    }
    let report = ComassReport::from_samples(&samples);
    let r = curvature;
    let asin = (PI * r).min(1.0).asin();
    let mut cert = Certificate::new("sphere_two_chart", 21.0 * SQRT3, r, report.value, 1e-9);
    cert.checks = vec![
        Check::new("g12_distance_le_2pi_R", worst.g_dist, 2.0 * PI * r + 1e-6),
        Check::new("g12_in_log_domain", worst.g_dist, 2.0 * (0.25f64).sin()),
        Check::new("log_g12_le_2_arcsin_pi_R", worst.log_norm, 2.0 * asin + 1e-6),
        Check::new("arcsin_pi_R_lt_sqrt3_pi_R", asin, SQRT3 * PI * r),
        Check::new("dexp_le_5_3", worst.dexp_ratio, 5.0 / 3.0),
        Check::new("dlog_le_3", worst.dlog_ratio, 3.0),
        Check::new("radial_forms_le_sqrt3_R", worst.a1.max(worst.a2), SQRT3 * r * 1.05 + 1e-9),
        Check::new("dg12_le_2sqrt3_R", worst.dg, 2.0 * SQRT3 * r * 1.05 + 1e-9),
        Check::new(
            "dalpha2_bound",
            worst.dalpha,
            (10.0 / (PI - 3.0 * eps) + 10.0 * eps / 3.0) * asin + 5.0 * worst.dg + 1e-6,
        ),
        Check::new("cutoff_slope", slope, 1.0 / (PI / 3.0 - eps) + eps),
        Check::new("glue_consistency", consistency, 1e-6),
    ];
    Ok(GaugeTrivialization {
        field: Arc::new(glue),
        domain: GaugeDomain::Global,
        form_comass: report,
        certificate: Some(cert),
    })
}
