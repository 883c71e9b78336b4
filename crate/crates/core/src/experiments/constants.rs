use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_cases, Case, Outcome, ScenarioConfig};
use crate::bundle::{chern_number_c1, comass_norm, constant_field, flat_circle, make_monopole, ComassMode, DEFAULT_C1_RESOLUTION};
use crate::error::Result;
use crate::gauge::{exponential_gauge, exponential_gauge_constant};
use crate::geometry::{from_polar, Manifold, PathCurve, Point};
use crate::transport::{parallel_transport, TransportConfig};
use crate::ucalc::{self, AntiHermitian, C64};

fn equator() -> PathCurve {
    PathCurve::parametric(Manifold::unit_sphere(), |s| from_polar(1.0, PI / 2.0, 2.0 * PI * s), 0.0, 1.0)
}

pub(crate) fn monopole_exactness(cfg: &ScenarioConfig) -> Result<Outcome> {
    let ks: Vec<i64> = cfg.geometry.degrees.clone().unwrap_or_else(|| (-3..=3).collect());
    let hol_tol = cfg.tolerance("holonomy", 1e-8);
    let c1_tol = cfg.tolerance("c1", 1e-6);
    let mut jobs: Vec<(bool, i64)> = ks.iter().map(|k| (false, *k)).collect();
    jobs.extend(ks.iter().filter(|k| **k != 0).map(|k| (true, *k)));
    let cases = par_cases(jobs.len(), |i| {
        let (holonomy, k) = jobs[i];
        let b = make_monopole(k);
        if holonomy {
            let case = Case::new(format!("equator_holonomy_k{k}")).input("k", k);
            match parallel_transport(&b, &equator(), &TransportConfig::default()) {
                Ok(h) => {
                    let z = h.matrix.matrix()[(0, 0)];
                    let want = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let mut case = case;
                    case.measure("re", z.re);
                    case.measure("im", z.im);
                    case.measure("error", (z - C64::new(want, 0.0)).norm());
                    case.bound = Some(want);
                    case.require((z - C64::new(want, 0.0)).norm() <= hol_tol);
                    case
                }
                Err(e) => case.fail_with(e),
            }
        } else {
            let case = Case::new(format!("c1_k{k}")).input("k", k);
            match chern_number_c1(&b, DEFAULT_C1_RESOLUTION) {
                Ok(c1) => {
                    let mut case = case;
                    case.measure("c1", c1);
                    case.bound = Some(k as f64);
                    case.require((c1 - k as f64).abs() <= c1_tol);
                    case
                }
                Err(e) => case.fail_with(e),
            }
        }
    });
    Ok(Outcome::from_cases(cases))
}

fn ratio_case(id: String, b: &crate::BundleAtlas, center: &Point, r: f64, want: f64, tol: f64, out: &mut Outcome) {
    let case = Case::new(id).input("radius", r);
    match exponential_gauge(b, center, r) {
        Ok(g) => {
            let cert = g.certificate.expect("radial gauge is certified");
            let ratio = cert.measured / cert.curvature_norm;
            let mut case = case;
            case.measure("form_comass", cert.measured);
            case.measure("curvature", cert.curvature_norm);
            case.measure("ratio", ratio);
            case.measure("constant", cert.constant);
            case.bound = Some(want);
            case.require((ratio / want - 1.0).abs() <= tol && cert.holds);
            out.cases.push(case);
            out.certificates.push(cert);
        }
        Err(e) => out.cases.push(case.fail_with(e)),
    }
}

/// Constant fields on a plane disc saturate C(r) = r/2.
pub(crate) fn constants_euclidean(cfg: &ScenarioConfig) -> Result<Outcome> {
    let radii = cfg.geometry.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let tol = cfg.tolerance("ratio", 0.01);
    let field = cfg.bundle.amplitude.unwrap_or(0.8);
    let mut out = Outcome::default();
    for r in radii {
        let b = constant_field(1.25 * r, field)?;
        ratio_case(format!("ball_r{r}"), &b, &Point::zeros(), r, r / 2.0, tol, &mut out);
    }
    Ok(out)
}

/// The monopole saturates C(r) = tan(r/2) on the unit sphere.
pub(crate) fn constants_sphere(cfg: &ScenarioConfig) -> Result<Outcome> {
    let radii = cfg.geometry.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 2.0 * PI / 3.0]);
    let tol = cfg.tolerance("ratio", 0.01);
    let b = make_monopole(1);
    let north = Point::new(0.0, 0.0, 1.0, 0.0);
    let mut out = Outcome::default();
    for r in radii {
        ratio_case(format!("cap_r{r:.6}"), &b, &north, r, (r / 2.0).tan(), tol, &mut out);
    }
    let c = exponential_gauge_constant(&Manifold::unit_sphere(), 2.0 * PI / 3.0);
    let mut case = Case::new("constant_at_two_thirds_pi").input("radius", 2.0 * PI / 3.0);
    case.measure("constant", c);
    case.bound = Some(3f64.sqrt());
    case.require((c - 3f64.sqrt()).abs() < 1e-12);
    out.cases.push(case);
    Ok(out)
}

/// Random anti-Hermitian matrix of operator norm `norm`.
fn random_with_norm(rng: &mut ChaCha8Rng, m: usize, norm: f64) -> AntiHermitian {
    let a = ucalc::random_anti_hermitian(rng, m);
    let n = ucalc::op_norm(&a).max(1e-300);
    AntiHermitian::new(a * C64::new(norm / n, 0.0)).expect("anti-Hermitian by construction")
}

pub(crate) fn unitary_identities(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(1000);
    let sine_tol = cfg.tolerance("sine", 1e-9);
    let trip_tol = cfg.tolerance("round_trip", 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.case_seed(0));
    let mut sine: f64 = 0.0;
    let mut trip: f64 = 0.0;
    let mut dexp_dev: f64 = 0.0;
    let mut dexp_inv: f64 = 0.0;
    let mut dexp_ok = true;
    let mut errors = Vec::new();
    for _ in 0..n {
        let m = rng.gen_range(1..=4);
        let na = rng.gen_range(0.0..=PI);
        let a = random_with_norm(&mut rng, m, na);
        let u = ucalc::u_exp(&a);
        sine = sine.max((u.distance_to_identity() - 2.0 * (a.norm() / 2.0).sin()).abs());
        let ns = rng.gen_range(0.0..0.5);
        let small = random_with_norm(&mut rng, m, ns);
        match ucalc::u_log(&ucalc::u_exp(&small)) {
            Ok(l) => trip = trip.max(ucalc::op_norm(&(l.matrix() - small.matrix()))),
            Err(e) => errors.push(e.to_string()),
        }
        let dir = random_with_norm(&mut rng, m, 1.0);
        let ns = rng.gen_range(0.0..0.45);
        let small = random_with_norm(&mut rng, m, ns);
        match ucalc::dexp_bounds_check(&small, &dir) {
            Ok(r) => {
                dexp_dev = dexp_dev.max(r.deviation - r.deviation_bound);
                dexp_inv = dexp_inv.max(r.inverse_ratio - r.inverse_bound);
                dexp_ok &= r.holds;
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let mut c1 = Case::new("sine_identity").input("samples", n);
    c1.measure("max_error", sine);
    c1.bound = Some(sine_tol);
    c1.require(sine <= sine_tol);
    let mut c2 = Case::new("exp_log_round_trip").input("samples", n);
    c2.measure("max_error", trip);
    c2.bound = Some(trip_tol);
    c2.require(trip <= trip_tol && errors.is_empty());
    if let Some(e) = errors.first() {
        c2.error = Some(e.clone());
    }
    let mut c3 = Case::new("dexp_bounds").input("samples", n);
    c3.measure("max_deviation_excess", dexp_dev);
    c3.measure("max_inverse_excess", dexp_inv);
    c3.require(dexp_ok);
    Ok(Outcome::from_cases(vec![c1, c2, c3]))
}

/// Distance from theta to the lattice 2 pi Z.
fn lattice_distance(theta: f64) -> f64 {
    let k = (theta / (2.0 * PI)).round();
    (theta - 2.0 * PI * k).abs()
}

pub(crate) fn s1_flat_classification(cfg: &ScenarioConfig) -> Result<Outcome> {
    let thetas = cfg
        .geometry
        .thetas
        .clone()
        .unwrap_or_else(|| vec![0.0, PI, 2.0 * PI, -2.0 * PI, 1.0, 4.0 * PI, 0.5 * PI]);
    let tol = cfg.tolerance("classification", 1e-9);
    let cases = par_cases(thetas.len(), |i| {
        let theta = thetas[i];
        let case = Case::new(format!("theta_{i}")).input("theta", theta);
        let run = || -> Result<Case> {
            let b = flat_circle(1.0, theta)?;
            let curvature = comass_norm(&b, ComassMode::Full, 4)?.value;
            let path = PathCurve::parametric(b.base().clone(), |s| Point::new(s, 0.0, 0.0, 0.0), 0.0, 1.0);
            let h = parallel_transport(&b, &path, &TransportConfig::default())?;
            let z = h.matrix.matrix()[(0, 0)];
            // transport solves P' = -A P, so the loop holonomy is exp(-i theta)
            let expected = C64::new(0.0, -theta).exp();
            let trivial = (z - C64::new(1.0, 0.0)).norm() < tol;
            let oracle = lattice_distance(theta) < tol;
            let mut case = case.clone().input("oracle_trivial", oracle);
            case.measure("curvature", curvature);
            case.measure("holonomy_re", z.re);
            case.measure("holonomy_im", z.im);
            case.measure("holonomy_error", (z - expected).norm());
            case.measure("gauge_trivial", if trivial { 1.0 } else { 0.0 });
            case.require(curvature == 0.0 && (z - expected).norm() < tol && trivial == oracle);
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    });
    Ok(Outcome::from_cases(cases))
}
