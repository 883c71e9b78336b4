//! Unitary trivializations: radial gauges, the glued two-chart sphere gauge,
//! its fibrewise product version and relative flattening near a point.
//!
//! A gauge function s_c(x) maps trivialization coordinates to chart-c fibre
//! coordinates, so s_i = g_ij s_j on overlaps and the gauged form is
//! s^{-1} ds + s^{-1} A_c s.

mod flatten;
mod product;
mod radial;
mod sphere;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundle::{BundleAtlas, ComassReport, ConnectionModel};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::ucalc::{self, CMat, C64};

pub use flatten::{flatten_near_point, relative_flatten, Cutoff, FlattenPlan};
pub use product::{product_trivialize, product_trivialize_with, ProductGauge, ProductTrivialization, DEFAULT_SLICES};
pub use radial::{exponential_gauge, exponential_gauge_constant, RadialGauge};
pub use sphere::{sphere_cutoff, sphere_two_chart_trivialize, SphereGlue, SPHERE_THRESHOLD};

pub trait GaugeField: Send + Sync + fmt::Debug {
    fn rank(&self) -> usize;
    /// Number of atlas charts the field provides values for.
    fn chart_count(&self) -> usize;
    /// s_chart(x).  Must extend smoothly to nearby ambient points.
    fn value(&self, chart: usize, x: &Point) -> CMat;
    /// Closed-form gauged connection form, when the construction provides one.
    fn gauged_form(&self, x: &Point, v: &Tangent) -> Option<CMat> {
        let _ = (x, v);
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum GaugeDomain {
    Global,
    Ball { center: [f64; 4], radius: f64 },
}

impl GaugeDomain {
    pub fn contains(&self, m: &Manifold, x: &Point) -> bool {
        match self {
            GaugeDomain::Global => true,
            GaugeDomain::Ball { center, radius } => m.distance(&Point::from_row_slice(center), x) <= *radius,
        }
    }
}

/// One intermediate quantity compared against the estimate used in a proof step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub holds: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, limit: f64) -> Check {
        Check { name: name.into(), value, limit, holds: value <= limit }
    }
}

/// A bound of the form measured <= constant * curvature (+ slack).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Which estimate the bound comes from.
    pub theorem: String,
    pub constant: f64,
    pub curvature_norm: f64,
    pub bound: f64,
    pub measured: f64,
    pub slack: f64,
    pub holds: bool,
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn new(theorem: &str, constant: f64, curvature_norm: f64, measured: f64, slack: f64) -> Certificate {
        let bound = constant * curvature_norm;
        Certificate {
            theorem: theorem.into(),
            constant,
            curvature_norm,
            bound,
            measured,
            slack,
            holds: measured <= bound + slack,
            checks: Vec::new(),
        }
    }

    pub fn all_checks_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

#[derive(Clone)]
pub struct GaugeTrivialization {
    pub field: Arc<dyn GaugeField>,
    pub domain: GaugeDomain,
    /// Comass of the gauged connection form over the domain.
    pub form_comass: ComassReport,
    pub certificate: Option<Certificate>,
}

impl fmt::Debug for GaugeTrivialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeTrivialization")
            .field("domain", &self.domain)
            .field("form_comass", &self.form_comass.value)
            .field("certificate", &self.certificate)
            .finish()
    }
}

impl GaugeTrivialization {
    /// Largest |s_i - g_ij s_j| over overlap samples inside the domain.
    pub fn overlap_mismatch(&self, b: &BundleAtlas, resolution: usize) -> f64 {
        let m = b.base();
        let n = b.charts().len();
        let mut worst: f64 = 0.0;
        for s in m.sample_frames(resolution) {
            let x = s.point;
            if !self.domain.contains(m, &x) {
                continue;
            }
            let inside: Vec<usize> = (0..n).filter(|&i| m.chart_depth(&b.charts()[i], &x) > 1e-6).collect();
            for &i in &inside {
                for &j in &inside {
                    let d = self.field.value(i, &x) - b.transition(i, j, &x) * self.field.value(j, &x);
                    worst = worst.max(ucalc::op_norm(&d));
                }
            }
        }
        worst
    }
}

const GAUGE_FD_STEP: f64 = 1e-4;

/// s^{-1} ds(v) by Richardson-extrapolated central differences; returns (value, mismatch).
pub(crate) fn fd_log_derivative(field: &dyn GaugeField, chart: usize, x: &Point, v: &Tangent) -> (CMat, f64) {
    let d = |h: f64| (field.value(chart, &(x + v * h)) - field.value(chart, &(x - v * h))) * C64::new(0.5 / h, 0.0);
    let d1 = d(GAUGE_FD_STEP);
    let d2 = d(GAUGE_FD_STEP / 2.0);
    let mismatch = ucalc::op_norm(&(&d1 - &d2));
    let ds = (d2 * C64::new(4.0, 0.0) - d1) * C64::new(1.0 / 3.0, 0.0);
    (field.value(chart, x).adjoint() * ds, mismatch)
}

/// Connection of `inner` written in the gauge `field`.
#[derive(Debug)]
pub struct GaugedModel {
    inner: BundleAtlas,
    field: Arc<dyn GaugeField>,
}

impl GaugedModel {
    pub fn field(&self) -> &Arc<dyn GaugeField> {
        &self.field
    }
}

impl ConnectionModel for GaugedModel {
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn form(&self, c: usize, x: &Point, v: &Tangent) -> CMat {
        let s = self.field.value(c, x);
        let (sds, _) = fd_log_derivative(self.field.as_ref(), c, x, v);
        sds + s.adjoint() * self.inner.form(c, x, v) * &s
    }

    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        self.field.value(i, x).adjoint() * self.inner.transition(i, j, x) * self.field.value(j, x)
    }

    fn curvature(&self, c: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        // curvature transforms by conjugation
        let r = self.inner.curvature_in(c, x, v, w).ok()?.matrix;
        let s = self.field.value(c, x);
        Some(s.adjoint() * r * s)
    }

    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        let mut y = *x;
        for (k, (axis, l)) in self.inner.base().periods().iter().enumerate() {
            y[*axis] += shift[k] as f64 * l;
        }
        self.field.value(0, x).adjoint() * self.inner.deck(x, shift) * self.field.value(0, &y)
    }
}

/// Rewrites the connection in the gauge `g`.
pub fn apply_gauge(b: &BundleAtlas, g: &GaugeTrivialization) -> Result<BundleAtlas> {
    if g.field.chart_count() != b.charts().len() || g.field.rank() != b.rank() {
        return Err(GaugeError::CoverageMismatch);
    }
    let m = b.base();
    for s in m.sample_frames(1) {
        if !g.domain.contains(m, &s.point) {
            continue;
        }
        let c = b.chart_for(&s.point)?;
        for v in &s.frame {
            let (d, mismatch) = fd_log_derivative(g.field.as_ref(), c, &s.point, v);
            if mismatch > 1e-5 * (1.0 + ucalc::op_norm(&d)) {
                return Err(GaugeError::InsufficientlySmooth(mismatch));
            }
        }
    }
    Ok(BundleAtlas::new(m.clone(), Arc::new(GaugedModel { inner: b.clone(), field: g.field.clone() }), None))
}

/// Constant gauge s = u on every chart.
#[derive(Debug, Clone)]
pub struct ConstantGauge {
    pub u: CMat,
    pub charts: usize,
}

impl GaugeField for ConstantGauge {
    fn rank(&self) -> usize {
        self.u.nrows()
    }
    fn chart_count(&self) -> usize {
        self.charts
    }
    fn value(&self, _: usize, _: &Point) -> CMat {
        self.u.clone()
    }
}

/// Pointwise form comass of the gauged connection max_{|v|=1} |A(v)| over a frame.
pub(crate) fn form_comass(mats: &[CMat]) -> f64 {
    ucalc::max_op_norm_on_sphere(mats)
}
