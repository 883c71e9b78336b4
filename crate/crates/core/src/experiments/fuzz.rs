use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_cases, Case, Outcome, ScenarioConfig};
use crate::bundle::{make_monopole, perturb, torus_flux, trivial, BundleAtlas};
use crate::coulomb::{
    contraction_check, coulomb_project, lambda_on, small_connection_check, random_coclosed, scale_into_hypotheses, CoulombConfig,
    DecOperators, LambdaEstimate, MatrixCochain,
};
use crate::error::Result;
use crate::geometry::{DiscHomotopy, Manifold, SimplicialComplex};
use crate::transport::{holonomy_area_check, TransportConfig};
use crate::ucalc::{self, C64};

/// Random bundle and disc; even cases live on the unit sphere, odd ones on a flat torus.
fn area_case_input(seed: u64, on_sphere: bool) -> Result<(BundleAtlas, DiscHomotopy, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude = rng.gen_range(0.05..0.8);
    if on_sphere {
        let m = Manifold::unit_sphere();
        let (inner, label) = match rng.gen_range(0..3) {
            0 => (make_monopole(rng.gen_range(-2..=2)), "monopole"),
            1 => (trivial(m.clone(), 2), "trivial2"),
            _ => (trivial(m.clone(), 3), "trivial3"),
        };
        let b = perturb(&inner, rng.gen(), amplitude)?;
        let disc = DiscHomotopy::random(&m, &mut rng, 1.3)?;
        Ok((b, disc, format!("S2/{label}")))
    } else {
        let l = 2.0;
        let m = Manifold::torus(l, l)?;
        let (inner, label) = match rng.gen_range(0..2) {
            0 => (torus_flux([l, l], rng.gen_range(-2..=2))?, "flux"),
            _ => (trivial(m.clone(), 2), "trivial2"),
        };
        let b = perturb(&inner, rng.gen(), amplitude)?;
        let disc = DiscHomotopy::random(&m, &mut rng, 0.8 * m.injectivity_radius())?;
        Ok((b, disc, format!("T2/{label}")))
    }
}

pub(crate) fn lemma_area_fuzz(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(200);
    let tcfg = TransportConfig::default();
    let cases = par_cases(n, |i| {
        let seed = cfg.case_seed(i);
        let case = Case::new(format!("disc_{i}")).input("seed", seed);
        let run = || -> Result<Case> {
            let (b, disc, label) = area_case_input(seed, i % 2 == 0)?;
            let r = holonomy_area_check(&b, &disc, &tcfg)?;
            let mut case = case.clone().input("family", label);
            case.measure("deviation", r.deviation);
            case.measure("area", r.area);
            case.measure("curvature", r.curvature_norm);
            case.measure("integration_error", r.integration_error);
            case.measure("slack", r.slack);
            case.bound = Some(r.bound);
            case.require(r.holds);
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    });
    Ok(Outcome::from_cases(cases))
}

const NEWTON_SAMPLES: usize = 5;

struct Level {
    ops: DecOperators,
    lambda: LambdaEstimate,
}

fn level(l: usize) -> Result<Level> {
    let ops = DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), l)?)?;
    let lambda = lambda_on(&ops, l)?;
    Ok(Level { ops, lambda })
}

fn lemma_sample(lv: &Level, seed: u64, rank: usize) -> Result<crate::coulomb::SmallConnectionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fraction = rng.gen_range(0.2..0.9);
    let a = random_coclosed(&lv.ops, rank, &mut rng)?;
    let a = scale_into_hypotheses(&lv.ops, &a, lv.lambda.value, fraction)?;
    let mut r = small_connection_check(&lv.ops, &a, &lv.lambda)?;
    r.holds &= contraction_check(&lv.ops, &a, &lv.lambda, 8)?.holds;
    Ok(r)
}

/// Small rough edge cochain for the projection checks.
fn random_edge_cochain(ops: &DecOperators, rank: usize, comass: f64, seed: u64) -> MatrixCochain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = ops
        .edge_lengths()
        .iter()
        .map(|l| ucalc::random_anti_hermitian(&mut rng, rank) * C64::new(*l, 0.0))
        .collect();
    let a = MatrixCochain::new(1, rank, vals).expect("anti-Hermitian by construction");
    let c = ops.comass1(&a);
    a.scaled(comass / c)
}

pub(crate) fn coulomb_gauge(cfg: &ScenarioConfig) -> Result<Outcome> {
    let levels = cfg.resolutions_or(&[3, 4]);
    let n = cfg.seeds_or(100);
    let rank = cfg.bundle.rank.unwrap_or(2);
    let slack = cfg.tolerance("lemma_slack", crate::coulomb::LEMMA_SLACK);
    let lambda_tol = cfg.tolerance("lambda_delta", 0.05);
    let lv: Vec<Level> = levels.iter().map(|l| level(*l)).collect::<Result<_>>()?;
    let mut out = Outcome::default();

    let mut worst_slack = Vec::new();
    for (k, l) in lv.iter().enumerate() {
        let level = levels[k];
        let cases = par_cases(n, |i| {
            let seed = cfg.case_seed(i);
            let case = Case::new(format!("lemma_l{level}_{i}")).input("level", level).input("seed", seed);
            match lemma_sample(l, seed, rank) {
                Ok(r) => {
                    let mut case = case;
                    case.measure("lambda", r.lambda);
                    case.measure("form_comass", r.form_comass);
                    case.measure("d_comass", r.d_comass);
                    case.measure("curvature", r.curvature_comass);
                    case.measure("form_ratio", r.form_ratio);
                    case.measure("d_ratio", r.d_ratio);
                    case.measure("slack_needed", r.slack_needed);
                    case.bound = Some(slack);
                    match r.hypothesis_not_met {
                        Some(h) => case.fail_with(format!("hypothesis not met: {h}")),
                        None => {
                            case.require(r.holds && r.slack_needed <= slack);
                            case
                        }
                    }
                }
                Err(e) => case.fail_with(e),
            }
        });
        worst_slack.push(cases.iter().filter_map(|c| c.measured.get("slack_needed").copied()).fold(0.0, f64::max));
        out.cases.extend(cases);
    }
    for k in 1..lv.len() {
        let (a, b) = (&lv[k - 1].lambda, &lv[k].lambda);
        let delta = (b.value - a.value).abs() / a.value;
        let mut case = Case::new(format!("refine_l{}_l{}", levels[k - 1], levels[k]));
        case.measure("lambda_coarse", a.value);
        case.measure("lambda_fine", b.value);
        case.measure("lambda_delta", delta);
        case.measure("slack_coarse", worst_slack[k - 1]);
        case.measure("slack_fine", worst_slack[k]);
        case.bound = Some(lambda_tol);
        case.require(delta <= lambda_tol && worst_slack[k] <= worst_slack[k - 1] + 1e-12);
        out.cases.push(case);
    }

    let l = &lv[0];
    let pcfg = CoulombConfig { tolerance: 1e-10, lambda: Some(l.lambda.value), ..Default::default() };
    out.cases.extend(par_cases(NEWTON_SAMPLES, |i| {
        let seed = cfg.case_seed(10_000 + i);
        let case = Case::new(format!("newton_l{}_{i}", levels[0])).input("seed", seed).input("rank", rank);
        let run = || -> Result<Case> {
            let a = random_edge_cochain(&l.ops, rank, 0.01, seed);
            let r = coulomb_project(&l.ops, &a, &pcfg)?;
            let again = coulomb_project(&l.ops, &r.gauged, &pcfg)?;
            let idem = again.gauged.distance(&r.gauged);
            let c0 = l.ops.comass2(&l.ops.curvature_plaquette(&a)?);
            let c1 = l.ops.comass2(&l.ops.curvature_plaquette(&r.gauged)?);
            let mut case = case.clone();
            case.measure("iterations", r.iterations as f64);
            case.measure("residual", r.residual);
            case.measure("idempotence", idem);
            case.measure("curvature_drift", (c0 - c1).abs());
            case.bound = Some(1e-8);
            case.require(r.residual < 1e-8 && idem < 1e-9 && (c0 - c1).abs() < 1e-8);
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    }));
    Ok(out)
}
