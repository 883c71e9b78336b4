//! Parallel transport by ordered products of matrix exponentials.
//!
//! Transport solves P' = -A(c') P in the chart containing the current point,
//! switching charts where the deepest chart changes.  For a loop the result is
//! the holonomy written in the start chart.

use serde::{Deserialize, Serialize};

use crate::bundle::BundleAtlas;
use crate::error::{GaugeError, Result};
use crate::geometry::{DiscHomotopy, PathCurve, Point, Segment};
use crate::ucalc::{self, CMat, Unitary, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorOrder {
    /// exp(-A(midpoint) dt) per step
    MidpointMagnus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorEstimate {
    /// Compare against a run with a quarter of the step; report the finer result.
    QuarterStep,
    /// Compare against a run with half the step.
    HalfStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub step: f64,
    pub order: IntegratorOrder,
    pub error_mode: ErrorEstimate,
    /// StepTooCoarse is raised above this estimate.
    pub tolerance: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            step: 2e-3,
            order: IntegratorOrder::MidpointMagnus,
            error_mode: ErrorEstimate::QuarterStep,
            tolerance: 1e-4,
        }
    }
}

impl TransportConfig {
    pub fn with_step(step: f64) -> Self {
        TransportConfig { step, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(GaugeError::PreconditionViolated(format!("transport step {}", self.step)));
        }
        Ok(())
    }

    fn refinement(&self) -> usize {
        match self.error_mode {
            ErrorEstimate::QuarterStep => 4,
            ErrorEstimate::HalfStep => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyResult {
    /// Maps start-chart fibre coordinates at the start to end-chart coordinates
    /// at the end; for loops both are the start chart.
    pub matrix: Unitary,
    pub length: f64,
    pub error_estimate: f64,
    pub start_chart: usize,
    pub end_chart: usize,
    pub closed: bool,
}

/// Sub-interval of one segment transported in a fixed chart.
#[derive(Debug, Clone, Copy)]
struct Piece {
    seg: usize,
    tau0: f64,
    tau1: f64,
    chart: usize,
    /// transition applied after the piece (from `chart` to the next chart)
    next: Option<usize>,
}

fn chart_gap(b: &BundleAtlas, i: usize, j: usize, x: &Point) -> f64 {
    let m = b.base();
    m.chart_depth(&b.charts()[i], x) - m.chart_depth(&b.charts()[j], x)
}

/// Splits [0, 1] into intervals on which `curve` stays in one chart, switching
/// where the deepest chart changes (crossing located by bisection to 1e-10).
/// (t0, t1, chart, next chart)
type ChartInterval = (f64, f64, usize, Option<usize>);

/// Returns one interval per chart run.
pub(crate) fn chart_intervals(
    b: &BundleAtlas,
    curve: impl Fn(f64) -> Point,
    probes: usize,
    start_chart: usize,
) -> Result<Vec<ChartInterval>> {
    let mut out = Vec::new();
    let mut chart = start_chart;
    let mut t0 = 0.0;
    let mut prev = 0.0;
    for k in 1..=probes {
        let tau = k as f64 / probes as f64;
        let best = b.chart_for(&curve(tau))?;
        if best != chart {
            let (mut lo, mut hi) = (prev, tau);
            let g = |t: f64| chart_gap(b, chart, best, &curve(t));
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cross = 0.5 * (lo + hi);
            out.push((t0, cross, chart, Some(best)));
            t0 = cross;
            chart = best;
        }
        prev = tau;
    }
    out.push((t0, 1.0, chart, None));
    Ok(out)
}

fn split_pieces(b: &BundleAtlas, path: &PathCurve, step: f64) -> Result<Vec<Piece>> {
    let m = path.manifold();
    let mut pieces = Vec::new();
    let mut chart = b.chart_for(&path.start())?;
    for (si, seg) in path.segments().iter().enumerate() {
        let n = ((seg.length() / step).ceil() as usize).max(8);
        for (tau0, tau1, c, next) in chart_intervals(b, |t| seg.point(m, t), n, chart)? {
            pieces.push(Piece { seg: si, tau0, tau1, chart: c, next });
            chart = next.unwrap_or(c);
        }
    }
    Ok(pieces)
}

fn integrate_piece(b: &BundleAtlas, seg: &Segment, m: &crate::geometry::Manifold, p: &Piece, step: f64) -> CMat {
    let span = p.tau1 - p.tau0;
    let len = seg.length() * span.abs();
    let n = ((len / step).ceil() as usize).max(1);
    let dt = span / n as f64;
    let mut acc = ucalc::identity(b.rank());
    for k in 0..n {
        let tau = p.tau0 + (k as f64 + 0.5) * dt;
        let x = seg.point(m, tau);
        let v = seg.velocity(m, tau);
        let a = b.form(p.chart, &x, &v) * C64::new(-dt, 0.0);
        acc = ucalc::expm(&a) * acc;
    }
    acc
}

fn run(b: &BundleAtlas, path: &PathCurve, pieces: &[Piece], step: f64) -> CMat {
    let m = path.manifold();
    let segs = path.segments();
    let mut total = ucalc::identity(b.rank());
    for p in pieces {
        let seg = &segs[p.seg];
        total = integrate_piece(b, seg, m, p, step) * total;
        if let Some(j) = p.next {
            // v_j = g_ji v_i
            let x = seg.point(m, p.tau1);
            total = b.transition(j, p.chart, &x) * total;
        }
        total = ucalc::keep_unitary(total);
    }
    total
}

/// Product-integral transport along `path`.
pub fn parallel_transport(b: &BundleAtlas, path: &PathCurve, cfg: &TransportConfig) -> Result<HolonomyResult> {
    cfg.validate()?;
    if path.manifold() != b.base() {
        return Err(GaugeError::BaseMismatch);
    }
    let pieces = split_pieces(b, path, cfg.step)?;
    let start_chart = pieces[0].chart;
    let mut end_chart = pieces.last().map(|p| p.chart).unwrap_or(start_chart);
    let coarse = run(b, path, &pieces, cfg.step);
    let fine = run(b, path, &pieces, cfg.step / cfg.refinement() as f64);
    let error_estimate = ucalc::op_norm(&(&coarse - &fine));
    if error_estimate > cfg.tolerance {
        return Err(GaugeError::StepTooCoarse(error_estimate));
    }
    let (start, end) = (path.start(), path.end());
    let shift = b.base().lattice_shift(&start, &end);
    let mut matrix = fine;
    if let Some(n) = shift {
        if end_chart != start_chart {
            matrix = b.transition(start_chart, end_chart, &end) * matrix;
            end_chart = start_chart;
        }
        if n != [0, 0] {
            matrix = b.deck(&start, n) * matrix;
        }
    }
    Ok(HolonomyResult {
        matrix: Unitary::new(ucalc::keep_unitary(matrix))?,
        length: path.length(),
        error_estimate,
        start_chart,
        end_chart,
        closed: shift.is_some(),
    })
}

/// Largest curvature norm on the tangent planes of the disc, sampled on its grid.
pub fn restricted_curvature_norm(b: &BundleAtlas, disc: &DiscHomotopy) -> Result<f64> {
    let m = b.base();
    let mut best: f64 = 0.0;
    for (_, _, x) in disc.grid_points() {
        let f = m.frame(&x);
        let r = b.curvature(&x, &f[0], &f[1])?;
        best = best.max(ucalc::op_norm(r.matrix()));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyAreaReport {
    /// |P - Id| for the boundary loop
    pub deviation: f64,
    pub area: f64,
    pub curvature_norm: f64,
    pub bound: f64,
    pub integration_error: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks |P - Id| <= area(D) sup_D |R| for the boundary holonomy of a disc.
pub fn holonomy_area_check(b: &BundleAtlas, disc: &DiscHomotopy, cfg: &TransportConfig) -> Result<HolonomyAreaReport> {
    let hol = parallel_transport(b, &disc.boundary(), cfg)?;
    let deviation = hol.matrix.distance_to_identity();
    let area = disc.area();
    let curvature_norm = restricted_curvature_norm(b, disc)?;
    let bound = area * curvature_norm;
    let integration_error = hol.error_estimate + disc.area_error() * curvature_norm;
    let slack = integration_error + 1e-6;
    Ok(HolonomyAreaReport {
        deviation,
        area,
        curvature_norm,
        bound,
        integration_error,
        slack,
        holds: deviation <= bound + slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineSample {
    pub s: f64,
    pub area: f64,
    pub deviation: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineCheckReport {
    pub curvature_norm: f64,
    pub samples: Vec<SineSample>,
    /// max over samples of deviation - bound
    pub max_excess: f64,
    pub integration_error: f64,
    /// whether |R| is constant on the disc, in which case the bound is an equality
    pub constant_curvature: bool,
    /// max |deviation - bound|, meaningful when `constant_curvature`
    pub equality_gap: f64,
    pub holds: bool,
}

/// Verifies |P_s - Id| <= 2 sin(|R| area(D_s) / 2) along the homotopy for a line bundle.
pub fn abelian_sine_check(b: &BundleAtlas, disc: &DiscHomotopy, cfg: &TransportConfig) -> Result<SineCheckReport> {
    if b.rank() != 1 {
        return Err(GaugeError::RankNotOne(b.rank()));
    }
    let m = b.base();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (_, _, x) in disc.grid_points() {
        let f = m.frame(&x);
        let r = ucalc::op_norm(b.curvature(&x, &f[0], &f[1])?.matrix());
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let flux = hi * disc.area();
    if flux >= std::f64::consts::PI {
        return Err(GaugeError::FluxTooLarge(flux));
    }
    let mut samples = Vec::new();
    let mut integration_error: f64 = disc.area_error() * hi;
    for k in 1..=8 {
        let s = k as f64 / 8.0;
        let hol = parallel_transport(b, &disc.loop_at(s), cfg)?;
        integration_error = integration_error.max(hol.error_estimate);
        let area = disc.partial_area(s);
        samples.push(SineSample {
            s,
            area,
            deviation: hol.matrix.distance_to_identity(),
            bound: 2.0 * (0.5 * hi * area).sin(),
        });
    }
    let max_excess = samples.iter().map(|x| x.deviation - x.bound).fold(f64::NEG_INFINITY, f64::max);
    let equality_gap = samples.iter().map(|x| (x.deviation - x.bound).abs()).fold(0.0, f64::max);
    let constant_curvature = hi - lo <= 1e-9 * (1.0 + hi);
    Ok(SineCheckReport {
        curvature_norm: hi,
        samples,
        max_excess,
        integration_error,
        constant_curvature,
        equality_gap,
        holds: max_excess <= integration_error + 1e-6,
    })
}

// 8-point Gauss-Legendre on [0, 1], tabulated to 17 digits
#[allow(clippy::excessive_precision)]
const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_8, 0.050_614_268_145_188_1),
    (0.101_666_761_293_186_6, 0.111_190_517_226_687_2),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_6),
    (0.408_282_678_752_175_1, 0.181_341_891_689_181),
    (0.591_717_321_247_824_9, 0.181_341_891_689_181),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_6),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_2),
    (0.980_144_928_248_768_2, 0.050_614_268_145_188_1),
];

/// Integral of R(d_s c, d_t c) over [0,1]^2 by composite Gauss-Legendre with the given panel counts.
pub fn disc_flux(b: &BundleAtlas, disc: &DiscHomotopy, panels: (usize, usize)) -> Result<C64> {
    if b.rank() != 1 {
        return Err(GaugeError::RankNotOne(b.rank()));
    }
    let (ps, pt) = panels;
    let mut vals = Vec::with_capacity(ps * pt * 64);
    for i in 0..ps {
        for j in 0..pt {
            for (xs, ws) in GL8 {
                for (xt, wt) in GL8 {
                    let s = (i as f64 + xs) / ps as f64;
                    let t = (j as f64 + xt) / pt as f64;
                    let x = disc.eval(s, t);
                    let (ds, dt) = disc.partials(s, t);
                    let c = b.chart_for(&x)?;
                    let r = b.curvature_in(c, &x, &ds, &dt)?.matrix[(0, 0)];
                    vals.push(r * (ws * wt / (ps * pt) as f64));
                }
            }
        }
    }
    let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
    let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
    Ok(C64::new(crate::util::pairwise_sum(&re), crate::util::pairwise_sum(&im)))
}

/// Stokes oracle exp(-iint_D R) for line bundles.
pub fn abelian_flux_holonomy(b: &BundleAtlas, disc: &DiscHomotopy) -> Result<Unitary> {
    let flux = disc_flux(b, disc, (16, 32))?;
    Unitary::new(ucalc::scalar((-flux).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{make_monopole, perturb, torus_flux, trivial};
    use crate::geometry::{from_polar, Manifold};
    use nalgebra::Vector4;
    use std::f64::consts::PI;

    fn equator() -> PathCurve {
        PathCurve::parametric(Manifold::unit_sphere(), |t| from_polar(1.0, PI / 2.0, t), 0.0, 2.0 * PI)
    }

    #[test]
    fn monopole_equator_is_minus_one() {
        let h = parallel_transport(&make_monopole(1), &equator(), &TransportConfig::default()).unwrap();
        assert!(h.closed);
        assert!((h.matrix.matrix()[(0, 0)] + C64::new(1.0, 0.0)).norm() < 1e-8);
        let h2 = parallel_transport(&make_monopole(2), &equator(), &TransportConfig::default()).unwrap();
        assert!((h2.matrix.matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn flat_loop_is_identity() {
        let b = trivial(Manifold::unit_sphere(), 2);
        let h = parallel_transport(&b, &equator(), &TransportConfig::default()).unwrap();
        assert!(h.matrix.distance_to_identity() < 1e-14);
    }

    #[test]
    fn chart_independent_holonomy() {
        // a loop crossing the equator: transport started in either chart agrees up to g
        let b = make_monopole(3);
        let base = from_polar(1.0, PI / 2.0, 0.3);
        let d = DiscHomotopy::cap(Manifold::unit_sphere(), base, Vector4::new(0.0, 0.0, 1.0, 0.0), 0.8).unwrap();
        let h = parallel_transport(&b, &d.boundary(), &TransportConfig::default()).unwrap();
        let oracle = abelian_flux_holonomy(&b, &d).unwrap();
        assert!((h.matrix.matrix()[(0, 0)] - oracle.matrix()[(0, 0)]).norm() < 1e-7);
    }

    #[test]
    fn step_halving_reduces_error() {
        let b = perturb(&trivial(Manifold::unit_sphere(), 2), 4, 0.5).unwrap();
        let d = DiscHomotopy::cap(Manifold::unit_sphere(), from_polar(1.0, 0.7, 0.2), Vector4::new(1.0, 0.0, 0.0, 0.0), 0.9)
            .unwrap();
        let mut cfg = TransportConfig::with_step(0.05);
        cfg.error_mode = ErrorEstimate::HalfStep;
        let e1 = parallel_transport(&b, &d.boundary(), &cfg).unwrap().error_estimate;
        cfg.step = 0.025;
        let e2 = parallel_transport(&b, &d.boundary(), &cfg).unwrap().error_estimate;
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn torus_loop_uses_deck() {
        // straight loop around the x-cycle at height y: holonomy exp(2 pi i c y / L2)
        let b = torus_flux([1.0, 2.0], 1).unwrap();
        let y = 0.7;
        let t = Manifold::torus(1.0, 2.0).unwrap();
        let p = PathCurve::parametric(t, move |s| Vector4::new(s, y, 0.0, 0.0), 0.0, 1.0);
        let h = parallel_transport(&b, &p, &TransportConfig::default()).unwrap();
        assert!(h.closed);
        let want = (C64::new(0.0, -2.0 * PI * y / 2.0)).exp();
        assert!((h.matrix.matrix()[(0, 0)] - want).norm() < 1e-10, "{:?}", h.matrix.matrix()[(0, 0)]);
    }

    #[test]
    fn hemisphere_area_check() {
        let base = from_polar(1.0, PI / 2.0, 0.0);
        let d = DiscHomotopy::cap(Manifold::unit_sphere(), base, Vector4::new(0.0, 0.0, 1.0, 0.0), PI / 2.0).unwrap();
        let r = holonomy_area_check(&make_monopole(1), &d, &TransportConfig::default()).unwrap();
        assert!((r.deviation - 2.0).abs() < 1e-8);
        assert!((r.area - 2.0 * PI).abs() < 1e-4);
        assert!((r.bound - PI).abs() < 1e-3 && r.holds);
        let oracle = abelian_flux_holonomy(&make_monopole(1), &d).unwrap();
        assert!((oracle.matrix()[(0, 0)] + C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn sine_bound_is_equality_for_monopole_caps() {
        let base = from_polar(1.0, 1.0, 0.4);
        let d = DiscHomotopy::cap(Manifold::unit_sphere(), base, Vector4::new(0.0, 0.0, 1.0, 0.0), 1.2).unwrap();
        let r = abelian_sine_check(&make_monopole(1), &d, &TransportConfig::default()).unwrap();
        assert!(r.holds && r.constant_curvature);
        assert!(r.equality_gap < 1e-5, "{}", r.equality_gap);
    }

    #[test]
    fn flux_quadrature_converges() {
        let b = perturb(&make_monopole(1), 9, 0.3).unwrap();
        let d = DiscHomotopy::cap(Manifold::unit_sphere(), from_polar(1.0, 1.2, 0.0), Vector4::new(0.0, 1.0, 0.0, 0.0), 0.7)
            .unwrap();
        let a = disc_flux(&b, &d, (8, 16)).unwrap();
        let c = disc_flux(&b, &d, (16, 32)).unwrap();
        assert!((a - c).norm() < 1e-8);
    }
}
