//! Scenario runner: each scenario turns a [`ScenarioConfig`] into a [`Report`]
//! of per-case measurements and pass/fail verdicts.

mod config;
mod constants;
mod fuzz;
mod gauges;
mod karea;
mod lattice;
mod report;

use rayon::prelude::*;

use crate::error::{GaugeError, Result};
use crate::gauge::Certificate;

pub use config::{BundleParams, GeometryParams, ScenarioConfig, CONFIG_SCHEMA};
pub use karea::replay_witness;
pub use lattice::{minimize_lattice_comass, LatticeMonopole, MinimizeOutcome};
pub use report::{BoundDirection, Case, KAreaBound, Report, Summary, REPORT_SCHEMA};

/// What a scenario produces before it is wrapped into a report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub cases: Vec<Case>,
    pub kbounds: Vec<KAreaBound>,
    pub certificates: Vec<Certificate>,
}

impl Outcome {
    pub fn from_cases(cases: Vec<Case>) -> Outcome {
        Outcome { cases, ..Default::default() }
    }
}

type Runner = fn(&ScenarioConfig) -> Result<Outcome>;

#[derive(Clone, Copy)]
pub struct ScenarioInfo {
    pub name: &'static str,
    /// The statement the scenario checks.
    pub anchor: &'static str,
    runner: Runner,
}

impl std::fmt::Debug for ScenarioInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioInfo").field("name", &self.name).field("anchor", &self.anchor).finish()
    }
}

const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "lemma_area_fuzz",
        anchor: "holonomy-area inequality: |P - Id| <= area(D) sup_D |R| for discs on S^2 and T^2",
        runner: fuzz::lemma_area_fuzz,
    },
    ScenarioInfo {
        name: "monopole_exactness",
        anchor: "monopole(k): equator holonomy (-1)^k and c1 = k",
        runner: constants::monopole_exactness,
    },
    ScenarioInfo {
        name: "constants_euclidean",
        anchor: "exponential gauge on a Euclidean ball: |A| <= (r/2) |R|, saturated by constant fields",
        runner: constants::constants_euclidean,
    },
    ScenarioInfo {
        name: "constants_sphere",
        anchor: "exponential gauge on the unit sphere: |A| <= tan(r/2) |R|, C(2 pi/3) = sqrt 3",
        runner: constants::constants_sphere,
    },
    ScenarioInfo {
        name: "unitary_identities",
        anchor: "|e^A - Id| = 2 sin(|A|/2), exp/log inverse on the log domain, dexp bounds",
        runner: constants::unitary_identities,
    },
    ScenarioInfo {
        name: "s1_flat_classification",
        anchor: "flat connection i theta dt on S^1 is gauge trivial iff theta in 2 pi Z",
        runner: constants::s1_flat_classification,
    },
    ScenarioInfo {
        name: "sphere_trivialization",
        anchor: "two-chart gluing on S^2: |R| < 1/13 gives a global gauge with |A| <= 21 sqrt 3 |R|",
        runner: gauges::sphere_trivialization,
    },
    ScenarioInfo {
        name: "product_circle",
        anchor: "fibrewise gluing on S^2 x S^1: tangent comass of the gauged difference <= 21 sqrt 3 |R|_T",
        runner: gauges::product_circle,
    },
    ScenarioInfo {
        name: "relative_flatten",
        anchor: "relative flattening near a point: trivial on the inner tube, |R'| <= c |R|",
        runner: gauges::relative_flatten,
    },
    ScenarioInfo {
        name: "coulomb_gauge",
        anchor: "Coulomb gauge: |A| <= 2 lambda |R|, |dA| <= 2 |R| for coclosed A; Newton projection",
        runner: fuzz::coulomb_gauge,
    },
    ScenarioInfo {
        name: "stable_triviality_threshold",
        anchor: "|R| < 1/2 on the unit sphere forces c1 = 0 for line bundles; monopole(1) is optimal",
        runner: karea::stable_triviality_threshold,
    },
    ScenarioInfo {
        name: "torus_karea_growth",
        anchor: "push-forwards along d^2-sheeted covers witness unbounded K-area of the torus",
        runner: karea::torus_karea_growth,
    },
    ScenarioInfo {
        name: "monopole_curvature_minimization",
        anchor: "infimal curvature comass at fixed c1 = k on the unit sphere is |k|/2",
        runner: karea::monopole_curvature_minimization,
    },
];

pub fn scenarios() -> &'static [ScenarioInfo] {
    SCENARIOS
}

pub fn scenario_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.name).collect()
}

pub fn find_scenario(name: &str) -> Result<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name).ok_or_else(|| GaugeError::UnknownScenario(name.into()))
}

/// Runs a scenario on a pool of `config.workers` threads.
pub fn run(config: &ScenarioConfig) -> Result<Report> {
    let info = find_scenario(&config.scenario)?;
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers.filter(|w| *w > 0) {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| GaugeError::Io(e.to_string()))?;
    let out = pool.install(|| (info.runner)(config))?;
    Ok(Report::new(config.clone(), info.anchor, out.cases, out.kbounds, out.certificates))
}

/// Evaluates `f` on 0..n concurrently and returns the results in index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn par_cases<F>(n: usize, f: F) -> Vec<Case>
where
    F: Fn(usize) -> Case + Sync + Send,
{
    par_map(n, f)
}
