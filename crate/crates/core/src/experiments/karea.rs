use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{par_cases, par_map, BoundDirection, Case, KAreaBound, LatticeMonopole, Outcome, ScenarioConfig};
use crate::bundle::{
    chern_number_c1, chern_weil_bound, comass_norm, make_monopole, perturb, pushforward_cover, torus_flux, BundleAtlas,
    BundleDocument, ComassMode, DEFAULT_C1_RESOLUTION,
};
use crate::error::{GaugeError, Result};
use crate::experiments::minimize_lattice_comass;

const COMASS_RESOLUTION: usize = 4;

fn measure(b: &BundleAtlas) -> Result<(f64, f64)> {
    Ok((comass_norm(b, ComassMode::Full, COMASS_RESOLUTION)?.value, chern_number_c1(b, DEFAULT_C1_RESOLUTION)?))
}

/// Lower bound 1/|R| witnessed by `b`, with its document for replay.
fn witness_bound(b: &BundleAtlas, class: &str, what: String) -> Result<KAreaBound> {
    let (comass, c1) = measure(b)?;
    Ok(KAreaBound {
        manifold: b.base().name(),
        class: class.into(),
        direction: BoundDirection::LowerViaWitness,
        value: 1.0 / comass,
        witness: what,
        witness_bundle: Some(BundleDocument::from_atlas(b)?),
        comass: Some(comass),
        c1: Some(c1),
    })
}

/// Rebuilds the witness of a lower bound and returns the largest relative
/// deviation of the recomputed comass, Chern number and bound.
pub fn replay_witness(k: &KAreaBound) -> Result<f64> {
    let doc = k.witness_bundle.as_ref().ok_or_else(|| GaugeError::Document("bound has no witness bundle".into()))?;
    let (comass, c1) = measure(&doc.build()?)?;
    let rel = |a: f64, b: Option<f64>| b.map(|b| (a - b).abs() / b.abs().max(1.0)).unwrap_or(f64::INFINITY);
    Ok(rel(comass, k.comass).max(rel(c1, k.c1)).max(rel(1.0 / comass, Some(k.value))))
}

pub(crate) fn stable_triviality_threshold(cfg: &ScenarioConfig) -> Result<Outcome> {
    let n = cfg.seeds_or(100);
    let c1_tol = cfg.tolerance("c1", 1e-6);
    let cases = par_cases(n, |i| {
        let seed = cfg.case_seed(i);
        let case = Case::new(format!("line_{i}")).input("seed", seed);
        let run = || -> Result<Case> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // mostly degree 0 below the threshold, some nontrivial controls above it
            let k: i64 = if rng.gen_bool(0.8) { 0 } else if rng.gen_bool(0.5) { 1 } else { -1 };
            let amplitude = rng.gen_range(0.02..0.48);
            let b = perturb(&make_monopole(k), rng.gen(), amplitude)?;
            let (comass, c1) = measure(&b)?;
            let (bound, holds) = chern_weil_bound(&b, c1, comass)?;
            let mut case = case.clone().input("k", k).input("amplitude", amplitude);
            case.measure("comass", comass);
            case.measure("c1", c1);
            case.bound = Some(bound);
            case.require(holds && (c1 - k as f64).abs() < c1_tol);
            if comass < 0.5 {
                // |c1| <= 2 |R| < 1 leaves only c1 = 0
                case.require(c1.abs() < c1_tol);
            }
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    });
    let mut out = Outcome { cases, ..Outcome::default() };
    for k in [1i64, 0] {
        let b = make_monopole(k);
        let (comass, c1) = measure(&b)?;
        let mut case = Case::new(format!("monopole_{k}")).input("k", k);
        case.measure("comass", comass);
        case.measure("c1", c1);
        case.bound = Some(0.5 * k as f64);
        case.require((comass - 0.5 * k as f64).abs() < 1e-9 && (c1 - k as f64).abs() < c1_tol);
        out.cases.push(case);
    }
    let b = make_monopole(1);
    out.kbounds.push(witness_bound(&b, "[S^2]", "monopole(1), constant curvature".into())?);
    out.kbounds.push(KAreaBound {
        manifold: b.base().name(),
        class: "[S^2] (line bundles)".into(),
        direction: BoundDirection::UpperViaChernWeil,
        value: b.base().area()? / (2.0 * PI),
        witness: "|c1| <= |R| area / 2 pi for rank 1".into(),
        witness_bundle: None,
        comass: None,
        c1: None,
    });
    Ok(out)
}

pub(crate) fn torus_karea_growth(cfg: &ScenarioConfig) -> Result<Outcome> {
    let degrees: Vec<usize> = match &cfg.geometry.degrees {
        Some(d) => d.iter().map(|x| *x as usize).collect(),
        None => (1..=4).collect(),
    };
    if degrees.contains(&0) {
        return Err(GaugeError::PreconditionViolated("cover degrees must be positive".into()));
    }
    let tol = cfg.tolerance("scaling", 1e-6);
    let side = 1.0;
    let results = par_map(degrees.len(), |i| -> Result<(KAreaBound, f64, usize)> {
        let d = degrees[i];
        let cover = torus_flux([side * d as f64, side * d as f64], 1)?;
        let b = pushforward_cover(&cover, d)?;
        let kb = witness_bound(&b, "[T^2]", format!("push-forward of the degree-1 line bundle on the {}-sheeted cover", d * d))?;
        let replay = replay_witness(&kb)?;
        Ok((kb, replay, b.rank()))
    });
    let mut out = Outcome::default();
    let mut base_bound = None;
    for (i, r) in results.into_iter().enumerate() {
        let d = degrees[i];
        let case = Case::new(format!("degree_{d}")).input("degree", d);
        match r {
            Ok((kb, replay, rank)) => {
                let comass = kb.comass.unwrap_or(f64::NAN);
                let c1 = kb.c1.unwrap_or(f64::NAN);
                let b1 = *base_bound.get_or_insert(kb.value / (d * d) as f64);
                let scaling = kb.value / b1 / (d * d) as f64;
                let mut case = case;
                case.measure("comass", comass);
                case.measure("c1", c1);
                case.measure("rank", rank as f64);
                case.measure("lower_bound", kb.value);
                case.measure("scaling", scaling);
                case.measure("replay", replay);
                case.bound = Some(2.0 * PI / (d * d) as f64 / (side * side));
                case.require(
                    rank == d * d
                        && (comass * (d * d) as f64 * side * side / (2.0 * PI) - 1.0).abs() < tol
                        && (c1 - 1.0).abs() < 1e-6
                        && (scaling - 1.0).abs() < tol
                        && replay < 1e-6,
                );
                out.cases.push(case);
                out.kbounds.push(kb);
            }
            Err(e) => out.cases.push(case.fail_with(e)),
        }
    }
    let mut growth = Case::new("strict_growth");
    let values: Vec<f64> = out.kbounds.iter().map(|k| k.value).collect();
    growth.require(values.len() == degrees.len() && values.windows(2).all(|w| w[1] > w[0]));
    out.cases.push(growth);
    Ok(out)
}

pub(crate) fn monopole_curvature_minimization(cfg: &ScenarioConfig) -> Result<Outcome> {
    let ks = cfg.geometry.degrees.clone().unwrap_or_else(|| vec![1, 2]);
    if ks.contains(&0) {
        return Err(GaugeError::PreconditionViolated("monopole degree must be nonzero".into()));
    }
    let level = cfg.resolutions.as_ref().and_then(|r| r.first().copied()).unwrap_or(3);
    let starts = cfg.seeds_or(5);
    let tol = cfg.tolerance("comass", 0.02);
    let amplitude = cfg.bundle.amplitude.unwrap_or(0.4);
    let jobs: Vec<(i64, Option<usize>)> =
        ks.iter().flat_map(|k| (0..starts).map(move |s| (*k, Some(s))).chain(std::iter::once((*k, None)))).collect();
    let cases = par_cases(jobs.len(), |i| {
        let (k, start) = jobs[i];
        let id = match start {
            Some(s) => format!("k{k}_warped_{s}"),
            None => format!("k{k}_at_minimizer"),
        };
        let case = Case::new(id).input("k", k).input("level", level);
        let run = || -> Result<Case> {
            let mut lat = LatticeMonopole::from_monopole(k, level)?;
            let mut case = case.clone();
            if let Some(s) = start {
                let seed = cfg.case_seed(s + 1000 * k.unsigned_abs() as usize);
                let scale = amplitude * (0.5 + s as f64 / starts.max(1) as f64);
                lat.warp(seed, scale)?;
                case = case.input("seed", seed).input("amplitude", scale);
            } else {
                minimize_lattice_comass(&mut lat, 10_000, 1e-10)?;
            }
            let floor = 0.5 * k.unsigned_abs() as f64;
            let r = match minimize_lattice_comass(&mut lat, 10_000, 1e-10) {
                Ok(r) => r,
                Err(GaugeError::OptimizerStalled { best }) => {
                    case.measure("comass", best);
                    return Ok(case.fail_with(GaugeError::OptimizerStalled { best }));
                }
                Err(e) => return Err(e),
            };
            case.measure("start_comass", r.start_comass);
            case.measure("comass", r.comass);
            case.measure("c1", r.c1 as f64);
            case.measure("iterations", r.iterations as f64);
            case.measure("energy", r.energy);
            case.bound = Some(floor * (1.0 + tol));
            case.require(r.c1 == k && r.comass <= floor * (1.0 + tol) && r.comass >= floor * (1.0 - 1e-9));
            if start.is_none() {
                case.require(r.iterations == 0 && r.energy <= r.start_energy);
            }
            Ok(case)
        };
        run().unwrap_or_else(|e| case.fail_with(e))
    });
    Ok(Outcome::from_cases(cases))
}
