//! End-to-end acceptance criteria. Each criterion runs its scenario(s), checks the
//! measurements against oracles computed here, and enforces a runtime budget.
//! Run with `cargo test --test acceptance -- --nocapture` to see the verdict lines.

use std::f64::consts::PI;
use std::time::Instant;

use gaugelab::experiments::{self, Case, Report, ScenarioConfig};

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn run(name: &str, edit: impl FnOnce(&mut ScenarioConfig)) -> Report {
    let mut cfg = ScenarioConfig::new(name);
    edit(&mut cfg);
    experiments::run(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn m(c: &Case, key: &str) -> f64 {
    *c.measured.get(key).unwrap_or_else(|| panic!("{}: no `{key}` ({:?})", c.id, c.error))
}

fn cases<'a>(r: &'a Report, prefix: &'a str) -> impl Iterator<Item = &'a Case> {
    r.cases.iter().filter(move |c| c.id.starts_with(prefix))
}

type Criterion = (&'static str, f64, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn holonomy_area() -> Verdict {
    let r = run("lemma_area_fuzz", |c| c.seeds = Some(200));
    let mut ok = 0;
    let mut spheres = 0;
    for c in &r.cases {
        let holds = c.error.is_none() && m(c, "deviation") <= c.bound.unwrap() + m(c, "integration_error") + 1e-6;
        ok += holds as usize;
        spheres += c.inputs["family"].as_str().is_some_and(|f| f.starts_with("S2")) as usize;
    }
    verdict(ok == 200 && spheres == 100 && r.passed(), format!("{ok}/200 discs ({spheres} on S^2)"))
}

fn monopole_exactness() -> Verdict {
    let r = run("monopole_exactness", |_| {});
    let h = r.cases.iter().find(|c| c.id == "equator_holonomy_k1").expect("k = 1 case");
    let hol = ((m(h, "re") + 1.0).powi(2) + m(h, "im").powi(2)).sqrt();
    let mut worst: f64 = 0.0;
    for k in -3i64..=3 {
        let c = r.cases.iter().find(|c| c.id == format!("c1_k{k}")).expect("c1 case");
        worst = worst.max((m(c, "c1") - k as f64).abs());
    }
    verdict(hol < 1e-8 && worst < 1e-6 && r.passed(), format!("|P + 1| = {hol:.2e}, max |c1 - k| = {worst:.2e}"))
}

fn gauge_constants() -> Verdict {
    let e = run("constants_euclidean", |c| c.geometry.radii = Some(vec![0.5, 1.0, 2.0]));
    let s = run("constants_sphere", |c| c.geometry.radii = Some(vec![0.5, 1.0, 2.0, 2.0 * PI / 3.0]));
    let mut worst: f64 = 0.0;
    for c in cases(&e, "ball_") {
        let r = c.inputs["radius"].as_f64().unwrap();
        worst = worst.max((m(c, "ratio") / (r / 2.0) - 1.0).abs());
    }
    for c in cases(&s, "cap_") {
        let r = c.inputs["radius"].as_f64().unwrap();
        worst = worst.max((m(c, "ratio") / (r / 2.0).tan() - 1.0).abs());
    }
    let top = s.cases.iter().find(|c| c.id == "constant_at_two_thirds_pi").unwrap();
    let sqrt3 = (m(top, "constant") - SQRT3).abs();
    let n = cases(&e, "ball_").count() + cases(&s, "cap_").count();
    verdict(
        n == 7 && worst < 0.01 && sqrt3 < 1e-12 && e.passed() && s.passed(),
        format!("max relative saturation error {worst:.2e} over {n} radii, |C(2pi/3) - sqrt 3| = {sqrt3:.1e}"),
    )
}

fn sphere_trivialization() -> Verdict {
    let r = run("sphere_trivialization", |c| {
        c.seeds = Some(50);
        c.bundle.curvature_range = Some([0.01, 0.07]);
    });
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for c in &r.cases {
        if c.error.is_some() {
            continue;
        }
        let rr = m(c, "curvature");
        let input = m(c, "input_curvature");
        let bound = 21.0 * SQRT3 * rr;
        let g12 = m(c, "g12_distance_le_2pi_R") <= 2.0 * PI * rr + 1e-6;
        worst = worst.max(m(c, "form_comass") / bound);
        ok += ((0.01..=0.07).contains(&input) && m(c, "form_comass") <= bound + 1e-9 && g12 && c.pass) as usize;
    }
    verdict(ok == 50, format!("{ok}/50 glued, max |A| / (21 sqrt3 |R|) = {worst:.3}"))
}

fn unitary_identities() -> Verdict {
    let r = run("unitary_identities", |c| c.seeds = Some(1000));
    let find = |id: &str| r.cases.iter().find(|c| c.id == id).unwrap();
    let sine = m(find("sine_identity"), "max_error");
    let trip = m(find("exp_log_round_trip"), "max_error");
    verdict(sine <= 1e-9 && trip <= 1e-10 && r.passed(), format!("sine identity {sine:.1e}, round trip {trip:.1e} on 1000 samples"))
}

fn product_case() -> Verdict {
    let r = run("product_circle", |c| c.seeds = Some(20));
    let mut ok = 0;
    let mut pullbacks = 0;
    for c in &r.cases {
        if c.error.is_some() {
            continue;
        }
        let mut holds = m(c, "difference_comass") <= 21.0 * SQRT3 * m(c, "curvature") + 1e-9 && c.pass;
        if let Some(d) = c.measured.get("holonomy_drift") {
            pullbacks += 1;
            holds &= *d < 1e-8;
        }
        ok += holds as usize;
    }
    verdict(ok == 20 && pullbacks > 0, format!("{ok}/20 seeds, {pullbacks} pullback holonomies preserved"))
}

fn relative_flatten() -> Verdict {
    let r = run("relative_flatten", |c| c.seeds = Some(20));
    let mut ok = 0;
    let mut inner: f64 = 0.0;
    for c in &r.cases {
        if c.error.is_some() {
            continue;
        }
        inner = inner.max(m(c, "inner_form"));
        ok += (m(c, "inner_form") < 1e-8 && m(c, "output_comass") <= m(c, "constant") * m(c, "input_comass") + 1e-4) as usize;
    }
    verdict(ok == 20, format!("{ok}/20 seeds, max inner-tube form {inner:.1e}"))
}

fn coulomb() -> Verdict {
    let r = run("coulomb_gauge", |c| {
        c.seeds = Some(100);
        c.resolutions = Some(vec![3, 4]);
    });
    let l3: Vec<&Case> = cases(&r, "lemma_l3_").collect();
    let l4: Vec<&Case> = cases(&r, "lemma_l4_").collect();
    let met = l3.iter().filter(|c| c.error.is_none() && m(c, "slack_needed") <= 0.10).count();
    let worst = |v: &[&Case]| v.iter().filter(|c| c.error.is_none()).map(|c| m(c, "slack_needed")).fold(0.0, f64::max);
    let (s3, s4) = (worst(&l3), worst(&l4));
    let refine = r.cases.iter().find(|c| c.id == "refine_l3_l4").unwrap();
    let delta = m(refine, "lambda_delta");
    let newton = cases(&r, "newton_").all(|c| c.error.is_none() && m(c, "residual") < 1e-8 && m(c, "idempotence") < 1e-9);
    verdict(
        met == 100 && s4 <= s3 && delta < 0.05 && newton && r.passed(),
        format!("{met}/100 at level 3, slack {s3:.3} -> {s4:.3}, lambda delta {delta:.2e}, Newton ok: {newton}"),
    )
}

fn threshold() -> Verdict {
    let r = run("stable_triviality_threshold", |c| c.seeds = Some(100));
    let below: Vec<&Case> = cases(&r, "line_").filter(|c| c.error.is_none() && m(c, "comass") < 0.5).collect();
    let trivial = below.iter().all(|c| m(c, "c1").abs() < 1e-6);
    let w = r.cases.iter().find(|c| c.id == "monopole_1").unwrap();
    let witness = (m(w, "comass") - 0.5).abs() < 1e-9 && (m(w, "c1") - 1.0).abs() < 1e-6;
    verdict(
        trivial && witness && !below.is_empty() && r.passed(),
        format!("{} bundles below 1/2 all have c1 = 0; monopole(1) comass {:.10}", below.len(), m(w, "comass")),
    )
}

fn torus_growth() -> Verdict {
    let r = run("torus_karea_growth", |c| c.geometry.degrees = Some(vec![1, 2, 3, 4]));
    let b1 = r.kbounds[0].value;
    let mut worst: f64 = 0.0;
    for (i, k) in r.kbounds.iter().enumerate() {
        let d = (i + 1) as f64;
        worst = worst.max((k.value / b1 / (d * d) - 1.0).abs());
        worst = worst.max((k.comass.unwrap() / (2.0 * PI / (d * d)) - 1.0).abs());
    }
    let replays = r.kbounds.iter().all(|k| experiments::replay_witness(k).unwrap() < 1e-6);
    verdict(
        r.kbounds.len() == 4 && worst < 1e-6 && replays && r.passed(),
        format!("bounds {:?}, max relative deviation from d^2 scaling {worst:.1e}", r.kbounds.iter().map(|k| k.value).collect::<Vec<_>>()),
    )
}

fn minimization() -> Verdict {
    let r = run("monopole_curvature_minimization", |c| {
        c.geometry.degrees = Some(vec![1]);
        c.seeds = Some(5);
    });
    let warped: Vec<&Case> = cases(&r, "k1_warped_").collect();
    let best = warped.iter().map(|c| m(c, "comass")).fold(0.0, f64::max);
    let ok = warped.len() == 5 && warped.iter().all(|c| m(c, "comass") <= 0.51 && m(c, "c1") == 1.0 && m(c, "start_comass") > 0.51);
    verdict(ok && r.passed(), format!("5 warped starts, worst final comass {best:.6} (floor 0.5)"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("holonomy-area inequality", 60.0, holonomy_area),
        ("monopole exactness", 5.0, monopole_exactness),
        ("exponential-gauge constants", 30.0, gauge_constants),
        ("sphere trivialization bound", 120.0, sphere_trivialization),
        ("unitary identities", 5.0, unitary_identities),
        ("product with a circle", 60.0, product_case),
        ("relative flattening", 60.0, relative_flatten),
        ("Coulomb gauge", 180.0, coulomb),
        ("threshold and optimality", 30.0, threshold),
        ("torus K-area growth", 30.0, torus_growth),
        ("curvature minimization", 120.0, minimization),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = v.pass && secs < *budget;
        println!(
            "criterion {:>2} {:<30} {}  {}  [{secs:.1} s / {budget} s]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
