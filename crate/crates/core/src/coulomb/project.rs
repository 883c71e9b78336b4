use serde::{Deserialize, Serialize};

use super::{DecOperators, MatrixCochain, PinnedSolver};
use crate::error::{GaugeError, Result};
use crate::ucalc::{self, CMat, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoulombConfig {
    pub max_iterations: usize,
    /// Target for max_v |d* A'|.
    pub tolerance: f64,
    /// Estimated lambda; when set, inputs must satisfy comass < safety / (2 lambda).
    pub lambda: Option<f64>,
    pub safety: f64,
}

impl Default for CoulombConfig {
    fn default() -> Self {
        CoulombConfig { max_iterations: 30, tolerance: 1e-10, lambda: None, safety: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct CoulombResult {
    /// Gauge as u with e^u at each vertex; star0-weighted mean zero.
    pub u: MatrixCochain,
    pub gauged: MatrixCochain,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// A' with edge transport g_q^{-1} exp(-A_e) g_p on the edge p -> q.
pub fn gauge_action(ops: &DecOperators, a: &MatrixCochain, g: &[CMat]) -> Result<MatrixCochain> {
    a.expect_degree(1)?;
    let values = ops
        .mesh()
        .edges()
        .iter()
        .zip(a.values())
        .map(|([p, q], v)| {
            let u = g[*q].adjoint() * ucalc::expm(&-v) * &g[*p];
            ucalc::logm_unitary(&u).map(|l| -l)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixCochain::from_values(1, a.rank(), values))
}

/// -(d0^T star1 A) entrywise, the right-hand side of L u = -star0 d* A.
fn divergence_columns(ops: &DecOperators, a: &MatrixCochain) -> Result<nalgebra::DMatrix<f64>> {
    let mut div = ops.codifferential(a)?;
    let star0 = ops.star0();
    let values = div.values.iter().enumerate().map(|(v, x)| x * C64::new(-star0[v], 0.0)).collect();
    div.values = values;
    Ok(DecOperators::split_columns(&div))
}

/// Abelian Coulomb gauge: A + du with d*(A + du) = 0 and mean-zero u.
pub fn coulomb_project_abelian(ops: &DecOperators, a: &MatrixCochain) -> Result<CoulombResult> {
    a.expect_degree(1)?;
    if a.rank() != 1 {
        return Err(GaugeError::RankNotOne(a.rank()));
    }
    let solver = ops.vertex_solver()?;
    let u = DecOperators::join_columns(&solver.solve(&divergence_columns(ops, a)?)?, 0, 1);
    let gauged = a.add(&ops.d0(&u)?)?;
    let residual = ops.coclosed_residual(&gauged)?;
    let scale = 1.0 + ops.coclosed_residual(a)?;
    if residual > 1e-10 * scale {
        return Err(GaugeError::SolverFailure(format!("coclosed residual {residual:.3e}")));
    }
    Ok(CoulombResult { u, gauged, iterations: 1, residual, history: vec![residual] })
}

/// Nonabelian Coulomb gauge by Newton iteration on F(u) = d*(e^{-u} d e^u + e^{-u} A e^u),
/// with the flat vertex Laplacian as the linearization.
pub fn coulomb_project(ops: &DecOperators, a: &MatrixCochain, cfg: &CoulombConfig) -> Result<CoulombResult> {
    let g0 = vec![ucalc::identity(a.rank()); ops.star0().len()];
    coulomb_project_from(ops, a, g0, cfg)
}

/// Same as [`coulomb_project`], starting from the vertex gauge `g`.
pub fn coulomb_project_from(
    ops: &DecOperators,
    a: &MatrixCochain,
    mut g: Vec<CMat>,
    cfg: &CoulombConfig,
) -> Result<CoulombResult> {
    a.expect_degree(1)?;
    if g.len() != ops.star0().len() {
        return Err(GaugeError::PreconditionViolated("initial gauge has wrong length".into()));
    }
    if let Some(lam) = cfg.lambda {
        let c = ops.comass1(a);
        if c >= cfg.safety / (2.0 * lam) {
            return Err(GaugeError::PreconditionViolated(format!(
                "comass {c:.4e} outside the Newton gate {:.4e}",
                cfg.safety / (2.0 * lam)
            )));
        }
    }
    let solver: PinnedSolver = ops.vertex_solver()?;
    let m = a.rank();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut current = gauge_action(ops, a, &g).map_err(|e| GaugeError::NewtonDiverged(e.to_string()))?;
    loop {
        let residual = ops.coclosed_residual(&current)?;
        history.push(residual);
        if !residual.is_finite() || residual > 1e3 * (history[0] + 1e-12) {
            return Err(GaugeError::NewtonDiverged(format!("residual {residual:.3e} after {iterations} steps")));
        }
        if residual < cfg.tolerance {
            break;
        }
        if iterations == cfg.max_iterations {
            return Err(GaugeError::NewtonDiverged(format!("residual {residual:.3e} after {iterations} steps")));
        }
        let step = DecOperators::join_columns(&solver.solve(&divergence_columns(ops, &current)?)?, 0, m);
        for (gv, dv) in g.iter_mut().zip(step.values()) {
            *gv = ucalc::keep_unitary(&*gv * ucalc::expm(dv));
        }
        iterations += 1;
        current = gauge_action(ops, a, &g).map_err(|e| GaugeError::NewtonDiverged(e.to_string()))?;
    }
    // right multiplication by a constant keeps d* A' = 0; use it to centre log g
    let star0 = ops.star0();
    let total: f64 = star0.iter().sum();
    let mut u = Vec::new();
    for _ in 0..8 {
        u = g
            .iter()
            .map(ucalc::logm_unitary)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| GaugeError::NewtonDiverged(e.to_string()))?;
        let mut mean = ucalc::zeros(m);
        for (x, w) in u.iter().zip(star0) {
            mean += x * C64::new(w / total, 0.0);
        }
        if ucalc::op_norm(&mean) < 1e-14 {
            break;
        }
        let h = ucalc::expm(&-mean);
        for gv in g.iter_mut() {
            *gv = ucalc::keep_unitary(&*gv * &h);
        }
    }
    let gauged = gauge_action(ops, a, &g)?;
    let residual = ops.coclosed_residual(&gauged)?;
    Ok(CoulombResult { u: MatrixCochain::from_values(0, m, u), gauged, iterations, residual, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Manifold, SimplicialComplex};
    use rand::SeedableRng;

    fn ops(level: usize) -> DecOperators {
        DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), level).unwrap()).unwrap()
    }

    fn random_edge(ops: &DecOperators, m: usize, comass: f64, seed: u64) -> MatrixCochain {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals = ops
            .edge_lengths()
            .iter()
            .map(|l| ucalc::random_anti_hermitian(&mut rng, m) * C64::new(*l, 0.0))
            .collect();
        let a = MatrixCochain::new(1, m, vals).unwrap();
        let c = ops.comass1(&a);
        a.scaled(comass / c)
    }

    #[test]
    fn zero_connection_is_fixed() {
        let d = ops(2);
        let r = coulomb_project(&d, &MatrixCochain::zeros(1, 2, d.edge_lengths().len()), &CoulombConfig::default())
            .unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.u.values().iter().all(|v| ucalc::max_abs(v) == 0.0));
    }

    #[test]
    fn pure_gradient_projects_to_zero() {
        let d = ops(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let v = MatrixCochain::new(0, 1, (0..d.star0().len()).map(|_| ucalc::random_anti_hermitian(&mut rng, 1)).collect())
            .unwrap();
        let r = coulomb_project_abelian(&d, &d.d0(&v).unwrap()).unwrap();
        assert!(d.comass1(&r.gauged) < 1e-10);
    }

    #[test]
    fn abelian_projection_preserves_loop_integrals() {
        let d = ops(2);
        let a = random_edge(&d, 1, 0.3, 4);
        let r = coulomb_project_abelian(&d, &a).unwrap();
        assert!(r.residual < 1e-10);
        let f0 = d.d1(&a).unwrap();
        let f1 = d.d1(&r.gauged).unwrap();
        assert!(f0.distance(&f1) < 1e-12);
    }

    #[test]
    fn newton_matches_abelian_solution() {
        let d = ops(2);
        let a = random_edge(&d, 1, 0.05, 5);
        let n = coulomb_project(&d, &a, &CoulombConfig::default()).unwrap();
        let l = coulomb_project_abelian(&d, &a).unwrap();
        assert!(n.gauged.distance(&l.gauged) < 1e-9);
        assert!(n.u.distance(&l.u) < 1e-9);
    }

    #[test]
    fn small_rank_two_converges_fast_and_is_idempotent() {
        let d = ops(3);
        let a = random_edge(&d, 2, 1e-2, 6);
        let r = coulomb_project(&d, &a, &CoulombConfig { tolerance: 1e-9, ..Default::default() }).unwrap();
        assert!(r.iterations <= 8, "{:?}", r.history);
        assert!(r.residual < 1e-8);
        let again = coulomb_project(&d, &r.gauged, &CoulombConfig::default()).unwrap();
        assert!(again.gauged.distance(&r.gauged) < 1e-9);
        // curvature is gauge covariant
        let c0 = d.comass2(&d.curvature_plaquette(&a).unwrap());
        let c1 = d.comass2(&d.curvature_plaquette(&r.gauged).unwrap());
        assert!((c0 - c1).abs() < 1e-8);
    }

    #[test]
    fn different_starts_agree_up_to_a_constant() {
        let d = ops(2);
        let a = random_edge(&d, 2, 0.02, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g0: Vec<CMat> = (0..d.star0().len())
            .map(|_| ucalc::expm(&(ucalc::random_anti_hermitian(&mut rng, 2) * C64::new(0.02, 0.0))))
            .collect();
        let cfg = CoulombConfig::default();
        let r1 = coulomb_project(&d, &a, &cfg).unwrap();
        let r2 = coulomb_project_from(&d, &a, g0, &cfg).unwrap();
        let h: Vec<CMat> = r1
            .u
            .values()
            .iter()
            .zip(r2.u.values())
            .map(|(x, y)| ucalc::expm(&-x) * ucalc::expm(y))
            .collect();
        for hv in &h {
            assert!(ucalc::op_norm(&(hv - &h[0])) < 1e-6);
        }
    }

    #[test]
    fn gate_rejects_large_input() {
        let d = ops(2);
        let a = random_edge(&d, 2, 0.5, 9);
        let cfg = CoulombConfig { lambda: Some(1.0), ..Default::default() };
        assert!(matches!(coulomb_project(&d, &a, &cfg), Err(GaugeError::PreconditionViolated(_))));
    }
}
