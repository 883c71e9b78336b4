//! Hermitian bundles with connection given by local forms on chart domains.
//!
//! Convention: fibre coordinates satisfy v_i = g_ij v_j and local forms obey
//! A_j = g_ij^{-1} dg_ij + g_ij^{-1} A_i g_ij.

mod document;
mod families;
mod ops;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::geometry::{ChartSpec, Manifold, Point, Tangent};
use crate::ucalc::{self, AntiHermitian, CMat, C64};
use crate::util::pairwise_sum;

pub use document::{load_bundle, save_bundle, BundleDocument, Recipe, BUNDLE_SCHEMA};
pub use families::{
    constant_field, flat_circle, make_monopole, make_monopole_on, torus_flux, trivial, ConstantFieldModel,
    FlatCircleModel, MonopoleModel, TorusFluxModel, TrivialModel,
};
pub use ops::{direct_sum, perturb, pullback, pushforward_cover, SmoothMap};

/// Local description of a connection.  Forms must be smooth functions of the
/// ambient point so that finite differences may leave the manifold.
pub trait ConnectionModel: Send + Sync + fmt::Debug {
    fn rank(&self) -> usize;
    /// A_chart(x)(v).
    fn form(&self, chart: usize, x: &Point, v: &Tangent) -> CMat;
    /// g_ij(x); identity by default.
    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        let _ = (i, j, x);
        ucalc::identity(self.rank())
    }
    /// Closed-form curvature, when known.
    fn curvature(&self, chart: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let _ = (chart, x, v, w);
        None
    }
    /// Deck matrix D with v_x = D v_{x + n L} for lifted periodic coordinates.
    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        let _ = (x, shift);
        ucalc::identity(self.rank())
    }
}

#[derive(Clone)]
pub struct BundleAtlas {
    base: Manifold,
    charts: Vec<ChartSpec>,
    model: Arc<dyn ConnectionModel>,
    recipe: Option<Recipe>,
}

impl fmt::Debug for BundleAtlas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BundleAtlas")
            .field("base", &self.base)
            .field("rank", &self.rank())
            .field("recipe", &self.recipe)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureValue {
    pub matrix: CMat,
    pub provenance: Provenance,
    /// |R_h - R_{h/2}| for finite differences; 0 when analytic.
    pub mismatch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComassMode {
    Full,
    TangentOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComassReport {
    pub value: f64,
    pub samples: usize,
    pub argmax: [f64; 4],
    /// Value on the next-coarser nested sample set.
    pub coarse_value: f64,
    pub refinement_delta: f64,
}

impl ComassReport {
    pub fn from_samples(values: &[(Point, f64, bool)]) -> ComassReport {
        let mut value = 0.0;
        let mut coarse_value: f64 = 0.0;
        let mut argmax = [0.0; 4];
        for (p, v, coarse) in values {
            if *v > value {
                value = *v;
                argmax = [p[0], p[1], p[2], p[3]];
            }
            if *coarse {
                coarse_value = coarse_value.max(*v);
            }
        }
        ComassReport {
            value,
            samples: values.len(),
            argmax,
            coarse_value,
            refinement_delta: value - coarse_value,
        }
    }
}

const FD_STEP: f64 = 1e-3;
const FD_SMOOTH_TOL: f64 = 1e-5;

impl BundleAtlas {
    pub fn new(base: Manifold, model: Arc<dyn ConnectionModel>, recipe: Option<Recipe>) -> Self {
        let charts = base.charts();
        BundleAtlas { base, charts, model, recipe }
    }

    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    pub fn base(&self) -> &Manifold {
        &self.base
    }

    pub fn charts(&self) -> &[ChartSpec] {
        &self.charts
    }

    pub fn model(&self) -> &Arc<dyn ConnectionModel> {
        &self.model
    }

    pub fn recipe(&self) -> Option<&Recipe> {
        self.recipe.as_ref()
    }

    /// Chart with the deepest domain containing x.
    pub fn chart_for(&self, x: &Point) -> Result<usize> {
        let c = self.base.best_chart(x);
        if self.base.chart_depth(&self.charts[c], x) < 0.0 {
            return Err(GaugeError::ChartDomainError);
        }
        Ok(c)
    }

    pub fn form(&self, chart: usize, x: &Point, v: &Tangent) -> CMat {
        self.model.form(chart, x, v)
    }

    pub fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        self.model.transition(i, j, x)
    }

    pub fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        if shift == [0, 0] {
            return ucalc::identity(self.rank());
        }
        self.model.deck(x, shift)
    }

    /// Curvature R(v, w) at x in the given chart.
    pub fn curvature_in(&self, chart: usize, x: &Point, v: &Tangent, w: &Tangent) -> Result<CurvatureValue> {
        if let Some(m) = self.model.curvature(chart, x, v, w) {
            return Ok(CurvatureValue { matrix: m, provenance: Provenance::Analytic, mismatch: 0.0 });
        }
        let (r1, r2) = (
            self.fd_curvature(chart, x, v, w, FD_STEP),
            self.fd_curvature(chart, x, v, w, FD_STEP / 2.0),
        );
        let mismatch = ucalc::op_norm(&(&r1 - &r2));
        if mismatch > FD_SMOOTH_TOL * (1.0 + ucalc::op_norm(&r2)) {
            return Err(GaugeError::InsufficientlySmooth(mismatch));
        }
        // Richardson combination of the two second-order estimates
        let r = (&r2 * C64::new(4.0, 0.0) - &r1) * C64::new(1.0 / 3.0, 0.0);
        Ok(CurvatureValue { matrix: r, provenance: Provenance::FiniteDifference, mismatch })
    }

    /// Finite-difference curvature only, ignoring any closed form.
    pub fn curvature_fd(&self, chart: usize, x: &Point, v: &Tangent, w: &Tangent) -> CMat {
        let r1 = self.fd_curvature(chart, x, v, w, FD_STEP);
        let r2 = self.fd_curvature(chart, x, v, w, FD_STEP / 2.0);
        (&r2 * C64::new(4.0, 0.0) - &r1) * C64::new(1.0 / 3.0, 0.0)
    }

    fn fd_curvature(&self, chart: usize, x: &Point, v: &Tangent, w: &Tangent, h: f64) -> CMat {
        let a = |p: &Point, u: &Tangent| self.model.form(chart, p, u);
        let dvaw = (a(&(x + v * h), w) - a(&(x - v * h), w)) * C64::new(0.5 / h, 0.0);
        let dwav = (a(&(x + w * h), v) - a(&(x - w * h), v)) * C64::new(0.5 / h, 0.0);
        let av = a(x, v);
        let aw = a(x, w);
        dvaw - dwav + &av * &aw - &aw * &av
    }

    /// Curvature at x using the deepest chart.
    pub fn curvature(&self, x: &Point, v: &Tangent, w: &Tangent) -> Result<AntiHermitian> {
        let c = self.chart_for(x)?;
        let r = self.curvature_in(c, x, v, w)?;
        AntiHermitian::new(r.matrix)
    }

    /// Pointwise curvature comass at x over the given orthonormal vectors.
    pub fn curvature_comass_at(&self, x: &Point, frame: &[Tangent]) -> Result<f64> {
        let c = self.chart_for(x)?;
        let r = |i: usize, j: usize| self.curvature_in(c, x, &frame[i], &frame[j]).map(|v| v.matrix);
        match frame.len() {
            0 | 1 => Ok(0.0),
            2 => Ok(ucalc::op_norm(&r(0, 1)?)),
            3 => Ok(ucalc::max_op_norm_on_sphere(&[r(1, 2)?, r(2, 0)?, r(0, 1)?])),
            n => Err(GaugeError::UnsupportedGeometry(format!("comass in dimension {n}"))),
        }
    }

    /// Pointwise form comass max_{|v| = 1} |A_chart(x)(v)|.
    pub fn form_comass_at(&self, chart: usize, x: &Point, frame: &[Tangent]) -> f64 {
        let mats: Vec<CMat> = frame.iter().map(|v| self.form(chart, x, v)).collect();
        ucalc::max_op_norm_on_sphere(&mats)
    }

    /// Deviations (cocycle, compatibility) sampled on chart overlaps.
    pub fn check_invariants(&self, resolution: usize) -> (f64, f64) {
        let n = self.charts.len();
        let mut cocycle: f64 = 0.0;
        let mut compat: f64 = 0.0;
        let h = 1e-5;
        for s in self.base.sample_frames(resolution) {
            let x = s.point;
            let inside: Vec<usize> =
                (0..n).filter(|&i| self.base.chart_depth(&self.charts[i], &x) > 1e-6).collect();
            for &i in &inside {
                for &j in &inside {
                    let gij = self.transition(i, j, &x);
                    for &k in &inside {
                        let d = &gij * self.transition(j, k, &x) - self.transition(i, k, &x);
                        cocycle = cocycle.max(ucalc::op_norm(&d));
                    }
                    if i == j {
                        continue;
                    }
                    let ginv = gij.adjoint();
                    for v in &s.frame {
                        let dg = (self.transition(i, j, &(x + v * h)) - self.transition(i, j, &(x - v * h)))
                            * C64::new(0.5 / h, 0.0);
                        let want = &ginv * dg + &ginv * self.form(i, &x, v) * &gij;
                        compat = compat.max(ucalc::op_norm(&(self.form(j, &x, v) - want)));
                    }
                }
            }
        }
        (cocycle, compat)
    }
}

/// Sampled supremum of the curvature comass.
pub fn comass_norm(b: &BundleAtlas, mode: ComassMode, resolution: usize) -> Result<ComassReport> {
    let samples = b.base.sample_frames(resolution.max(1));
    let values: Vec<Result<(Point, f64, bool)>> = samples
        .par_iter()
        .map(|s| {
            let frame = match mode {
                ComassMode::Full => &s.frame[..],
                ComassMode::TangentOnly => &s.frame[..s.base_dims],
            };
            Ok((s.point, b.curvature_comass_at(&s.point, frame)?, s.coarse))
        })
        .collect();
    let values: Vec<(Point, f64, bool)> = values.into_iter().collect::<Result<_>>()?;
    Ok(ComassReport::from_samples(&values))
}

// Degree-5 seven-point triangle rule (barycentric coordinates, weights sum to 1).
const TRI_RULE: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

pub const DEFAULT_C1_RESOLUTION: usize = 3;

/// Surface integral of a 2-form-valued scalar density f(x, d_u x, d_v x) over a closed surface,
/// by the seven-point rule on each (radially projected) mesh triangle.
pub(crate) fn integrate_surface<F>(base: &Manifold, level: usize, f: F) -> Result<f64>
where
    F: Fn(&Point, &Tangent, &Tangent) -> Result<f64> + Sync,
{
    if !base.is_closed_surface() {
        return Err(GaugeError::NonClosedSurface);
    }
    let mesh = base.triangulate(level)?;
    let radius = base.sphere_radius();
    let per_face: Vec<Result<f64>> = (0..mesh.faces().len())
        .into_par_iter()
        .map(|fi| {
            let [a, b, c] = mesh.face_positions(fi);
            let (eb, ec) = (b - a, c - a);
            let mut acc = 0.0;
            for (bary, w) in TRI_RULE.iter() {
                let p = a + eb * bary[1] + ec * bary[2];
                let (x, du, dv) = match radius {
                    Some(r) => {
                        let n = p.xyz().norm();
                        let u = p.xyz() / n;
                        let proj = |e: &Tangent| {
                            let e3 = e.xyz();
                            let t = (e3 - u * u.dot(&e3)) * (r / n);
                            Point::new(t[0], t[1], t[2], 0.0)
                        };
                        (Point::new(u[0] * r, u[1] * r, u[2] * r, 0.0), proj(&eb), proj(&ec))
                    }
                    None => (p, eb, ec),
                };
                acc += 0.5 * w * f(&x, &du, &dv)?;
            }
            Ok(acc)
        })
        .collect();
    let vals: Vec<f64> = per_face.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals))
}

/// (i / 2 pi) * integral of tr R over a closed surface.
pub fn chern_number_c1(b: &BundleAtlas, resolution: usize) -> Result<f64> {
    let total = integrate_surface(&b.base, resolution, |x, du, dv| {
        let c = b.chart_for(x)?;
        let r = b.curvature_in(c, x, du, dv)?.matrix;
        Ok((ucalc::I * r.trace()).re)
    })?;
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Checks |c1| <= m * comass * Area / (2 pi).
pub fn chern_weil_bound(b: &BundleAtlas, c1: f64, comass: f64) -> Result<(f64, bool)> {
    let bound = b.rank() as f64 * comass * b.base.area()? / (2.0 * std::f64::consts::PI);
    Ok((bound, c1.abs() <= bound + 1e-6))
}
