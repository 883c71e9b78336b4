use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_cases, par_map, Case, Outcome, ScenarioConfig};
use crate::bundle::{comass_norm, direct_sum, flat_circle, perturb, pullback, trivial, BundleAtlas, ComassMode, SmoothMap};
use crate::error::Result;
use crate::gauge::{apply_gauge, flatten_near_point, product_trivialize_with, sphere_two_chart_trivialize, Certificate};
use crate::geometry::{from_polar, Manifold, PathCurve, Point};
use crate::transport::{parallel_transport, ErrorEstimate, TransportConfig};
use crate::ucalc;

const GLUE_EPS: f64 = 0.05;

/// Perturbed trivial bundle on the unit sphere with curvature comass close to `target`.
fn sphere_input(seed: u64, rank: usize, target: f64) -> Result<(BundleAtlas, f64)> {
    let base = trivial(Manifold::unit_sphere(), rank);
    let mut amplitude = target;
    let mut b = perturb(&base, seed, amplitude)?;
    let mut r = comass_norm(&b, ComassMode::Full, 3)?.value;
    if r > 0.0 && (r / target - 1.0).abs() > 0.05 {
        amplitude *= target / r;
        b = perturb(&base, seed, amplitude)?;
        r = comass_norm(&b, ComassMode::Full, 3)?.value;
    }
    Ok((b, r))
}

fn certificate_case(mut case: Case, cert: &Certificate) -> Case {
    case.measure("curvature", cert.curvature_norm);
    case.measure("form_comass", cert.measured);
    for c in &cert.checks {
        case.measure(&c.name, c.value);
        case.measure(&format!("{}.limit", c.name), c.limit);
    }
    case.bound = Some(cert.bound);
    case.require(cert.holds && cert.all_checks_hold());
    case
}

pub(crate) fn sphere_trivialization(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(50);
    let [lo, hi] = cfg.bundle.curvature_range.unwrap_or([0.01, 0.07]);
    let results = par_map(n, |i| {
            let seed = cfg.case_seed(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rank = cfg.bundle.rank.unwrap_or_else(|| rng.gen_range(1..=3));
            // the amplitude correction lands within 5% of the target
            let target = rng.gen_range(1.05 * lo..=hi / 1.05);
            let case = Case::new(format!("sphere_{i}")).input("seed", seed).input("rank", rank).input("target", target);
            let inner_seed: u64 = rng.gen();
            let run = || -> Result<(Case, Certificate)> {
                let (b, r) = sphere_input(inner_seed, rank, target)?;
                let g = sphere_two_chart_trivialize(&b, GLUE_EPS)?;
                let cert = g.certificate.clone().expect("gluing is certified");
                let mut case = certificate_case(case.clone(), &cert);
                case.measure("input_curvature", r);
                case.measure("overlap_mismatch", g.overlap_mismatch(&b, 1));
                case.require(r >= lo && r <= hi && r < crate::gauge::SPHERE_THRESHOLD);
                Ok((case, cert))
            };
            match run() {
                Ok((c, cert)) => (c, Some(cert)),
                Err(e) => (case.fail_with(e), None),
            }
        });
    let mut out = Outcome::default();
    for (c, cert) in results {
        out.cases.push(c);
        out.certificates.extend(cert);
    }
    Ok(out)
}

fn fibre_loop(m: &Manifold, length: f64) -> PathCurve {
    PathCurve::parametric(m.clone(), |t| Point::new(0.0, 0.0, 1.0, t), 0.0, length)
}

/// Inputs over S^2 x S^1: sphere pullbacks, flat circle pullbacks, and perturbed sums.
fn product_input(seed: u64, m: &Manifold, length: f64) -> Result<(BundleAtlas, &'static str)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match rng.gen_range(0..3) {
        0 => {
            let (s, _) = sphere_input(rng.gen(), rng.gen_range(1..=2), rng.gen_range(0.01..0.06))?;
            Ok((pullback(&s, SmoothMap::ProjectToBase, m)?, "sphere_pullback"))
        }
        1 => {
            let theta = rng.gen_range(-3.0..3.0);
            Ok((pullback(&flat_circle(length, theta)?, SmoothMap::ProjectToCircle, m)?, "circle_pullback"))
        }
        _ => {
            let flat = pullback(&flat_circle(length, rng.gen_range(-3.0..3.0))?, SmoothMap::ProjectToCircle, m)?;
            let sum = direct_sum(&flat, &trivial(m.clone(), 1))?;
            Ok((perturb(&sum, rng.gen(), rng.gen_range(0.01..0.04))?, "mixed"))
        }
    }
}

pub(crate) fn product_circle(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(20);
    let length = 2.0;
    let slices = cfg.resolutions.as_ref().and_then(|r| r.first().copied()).unwrap_or(3);
    let m = Manifold::product(Manifold::unit_sphere(), length)?;
    let hol_tol = cfg.tolerance("holonomy", 1e-8);
    let results = par_map(n, |i| {
        let seed = cfg.case_seed(i);
        let case = Case::new(format!("product_{i}")).input("seed", seed).input("slices", slices);
        let run = || -> Result<(Case, Certificate)> {
            let (b, kind) = product_input(seed, &m, length)?;
            let p = product_trivialize_with(&b, GLUE_EPS, slices)?;
            let cert = p.gauge.certificate.clone().expect("gluing is certified");
            let mut case = certificate_case(case.clone().input("family", kind), &cert);
            case.measure("difference_comass", p.difference_comass());
            if kind != "mixed" {
                // pullbacks have no fibre component, so a coarse step is exact here
                let tcfg = TransportConfig { step: 1e-2, error_mode: ErrorEstimate::HalfStep, ..TransportConfig::default() };
                let gauged = apply_gauge(&b, &p.gauge)?;
                let h0 = parallel_transport(&b, &fibre_loop(&m, length), &tcfg)?.matrix.into_matrix();
                let h1 = parallel_transport(&gauged, &fibre_loop(&m, length), &tcfg)?.matrix.into_matrix();
                let h2 = parallel_transport(&p.reference, &fibre_loop(&m, length), &tcfg)?.matrix.into_matrix();
                let drift = ucalc::op_norm(&(&h0 - &h1)).max(ucalc::op_norm(&(&h0 - &h2)));
                case.measure("holonomy_drift", drift);
                case.require(drift < hol_tol);
            }
            Ok((case, cert))
        };
        match run() {
            Ok((c, cert)) => (c, Some(cert)),
            Err(e) => (case.fail_with(e), None),
        }
    });
    let mut out = Outcome::default();
    for (c, cert) in results {
        out.cases.push(c);
        out.certificates.extend(cert);
    }
    Ok(out)
}

pub(crate) fn relative_flatten(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(20);
    let inner_tol = cfg.tolerance("inner_form", 1e-8);
    let m = Manifold::unit_sphere();
    let cases = par_cases(n, |i| {
        let seed = cfg.case_seed(i);
        let case = Case::new(format!("flatten_{i}")).input("seed", seed);
        let run = || -> Result<Case> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rank = cfg.bundle.rank.unwrap_or_else(|| rng.gen_range(1..=3));
            let amplitude = rng.gen_range(0.03..0.2);
            let delta = rng.gen_range(0.1..0.22);
            let center = from_polar(1.0, rng.gen_range(0.0..std::f64::consts::PI), rng.gen_range(0.0..std::f64::consts::TAU));
            let b = perturb(&trivial(m.clone(), rank), rng.gen(), amplitude)?;
            let (plan, out) = flatten_near_point(&b, center, delta)?;
            let r0 = comass_norm(&b, ComassMode::Full, 2)?.value;
            let r1 = comass_norm(&out, ComassMode::Full, 2)?.value;
            // form of the output on B_delta, where the cutoff vanishes
            let c = plan.center_point();
            let frame = m.frame(&c);
            let mut inner: f64 = 0.0;
            for j in 0..12 {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / 12.0;
                let dir = frame[0] * phi.cos() + frame[1] * phi.sin();
                for s in [0.0, 0.5, 0.95] {
                    let x = m.exp_map(&c, &(dir * (s * delta)));
                    let chart = out.chart_for(&x)?;
                    for v in m.frame(&x) {
                        inner = inner.max(ucalc::op_norm(&out.form(chart, &x, &v)));
                    }
                }
            }
            let mut case = case.clone().input("rank", rank).input("delta", delta).input("amplitude", amplitude);
            case.measure("input_comass", r0);
            case.measure("output_comass", r1);
            case.measure("constant", plan.constant);
            case.measure("inner_form", inner);
            case.bound = Some(plan.constant * r0);
            case.require(inner < inner_tol && r1 <= plan.constant * r0 + 1e-4);
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    });
    Ok(Outcome::from_cases(cases))
}
