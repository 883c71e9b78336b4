use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DecOperators, MatrixCochain, PinnedSolver};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, SimplicialComplex};
use crate::ucalc::{self, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub value: f64,
    pub level: usize,
    /// Relative change from the previous mesh level, when one was computed.
    pub delta: Option<f64>,
    /// Edge where the comass ratio is attained.
    pub edge: usize,
}

/// alpha = star1^{-1} d1^T psi, which is coclosed for every face potential psi.
pub fn coclosed_from_potential(ops: &DecOperators, psi: &MatrixCochain) -> Result<MatrixCochain> {
    psi.expect_degree(2)?;
    let mut out = vec![ucalc::zeros(psi.rank()); ops.star1().len()];
    for (f, fe) in ops.mesh().face_edges().iter().enumerate() {
        for &(e, s) in fe {
            out[e] += &psi.values()[f] * C64::new(s, 0.0);
        }
    }
    for (e, v) in out.iter_mut().enumerate() {
        *v *= C64::new(1.0 / ops.star1()[e], 0.0);
    }
    Ok(MatrixCochain::from_values(1, psi.rank(), out))
}

/// min_c sum_f w_f |z_f - c|, attained at a weighted median.
fn weighted_l1_spread(z: &[f64], w: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut c = z[idx[0]];
    for &i in &idx {
        acc += w[i];
        if acc >= 0.5 * total {
            c = z[i];
            break;
        }
    }
    z.iter().zip(w).map(|(zi, wi)| wi * (zi - c).abs()).sum()
}

const CHUNK: usize = 128;

/// Discrete lambda = sup |alpha|_comass / |d alpha|_comass over coclosed 1-cochains.
///
/// Coclosed cochains on a surface with vanishing first cohomology are exactly
/// alpha = star1^{-1} d1^T psi, so the ratio is the norm of the map from face
/// densities (mean zero, sup norm) to edge comass. Per edge this is a weighted
/// L1 norm, evaluated exactly.
pub fn lambda_on(ops: &DecOperators, level: usize) -> Result<LambdaEstimate> {
    let b1 = ops.mesh().first_betti();
    if b1 != 0 {
        return Err(GaugeError::NonzeroFirstCohomology(b1));
    }
    let s = ops.face_laplacian()?;
    let areas = ops.face_areas().to_vec();
    let solver = PinnedSolver::new(&s, vec![1.0; areas.len()])?;
    let nf = areas.len();
    let ne = ops.star1().len();
    let mut sides: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ne];
    for (f, fe) in ops.mesh().face_edges().iter().enumerate() {
        for &(e, sg) in fe {
            sides[e].push((f, sg));
        }
    }
    let starts: Vec<usize> = (0..ne).step_by(CHUNK).collect();
    let per_chunk: Vec<Result<Vec<f64>>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + CHUNK).min(ne);
            let mut rhs = DMatrix::zeros(nf, end - start);
            for e in start..end {
                for &(f, sg) in &sides[e] {
                    rhs[(f, e - start)] += sg;
                }
            }
            let z = solver.solve(&rhs)?;
            Ok((start..end)
                .map(|e| {
                    let col: Vec<f64> = z.column(e - start).iter().copied().collect();
                    let k = 1.0 / (ops.star1()[e] * ops.edge_lengths()[e]);
                    k * weighted_l1_spread(&col, &areas)
                })
                .collect())
        })
        .collect();
    let mut best = 0.0;
    let mut edge = 0;
    let mut e = 0;
    for chunk in per_chunk {
        for v in chunk? {
            if v > best {
                best = v;
                edge = e;
            }
            e += 1;
        }
    }
    Ok(LambdaEstimate { value: best, level, delta: None, edge })
}

/// Lambda of an icosphere triangulation of the given level.
pub fn lambda_estimate(surface: &Manifold, level: usize) -> Result<LambdaEstimate> {
    let mesh = SimplicialComplex::build(surface, level)?;
    lambda_on(&DecOperators::new(&mesh)?, level)
}

/// Estimates at consecutive levels with relative deltas filled in.
pub fn lambda_sequence(surface: &Manifold, levels: &[usize]) -> Result<Vec<LambdaEstimate>> {
    let mut out: Vec<LambdaEstimate> = Vec::new();
    for &l in levels {
        let mut est = lambda_estimate(surface, l)?;
        if let Some(prev) = out.last() {
            est.delta = Some((est.value - prev.value).abs() / prev.value);
        }
        out.push(est);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn torus_has_no_lambda() {
        let t = Manifold::torus(1.0, 1.0).unwrap();
        assert_eq!(lambda_estimate(&t, 1).unwrap_err(), GaugeError::NonzeroFirstCohomology(2));
    }

    #[test]
    fn potential_cochains_are_coclosed() {
        let m = SimplicialComplex::build(&Manifold::unit_sphere(), 2).unwrap();
        let ops = DecOperators::new(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let psi = MatrixCochain::new(
            2,
            2,
            (0..ops.face_areas().len()).map(|_| ucalc::random_anti_hermitian(&mut rng, 2)).collect(),
        )
        .unwrap();
        let a = coclosed_from_potential(&ops, &psi).unwrap();
        assert!(ops.coclosed_residual(&a).unwrap() < 1e-10);
    }

    #[test]
    fn ratio_of_any_coclosed_cochain_is_below_lambda() {
        let m = SimplicialComplex::build(&Manifold::unit_sphere(), 2).unwrap();
        let ops = DecOperators::new(&m).unwrap();
        let lam = lambda_on(&ops, 2).unwrap().value;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let psi = MatrixCochain::new(
                2,
                1,
                (0..ops.face_areas().len()).map(|_| ucalc::random_anti_hermitian(&mut rng, 1)).collect(),
            )
            .unwrap();
            let a = coclosed_from_potential(&ops, &psi).unwrap();
            let ratio = ops.comass1(&a) / ops.comass2(&ops.d1(&a).unwrap());
            assert!(ratio <= lam * (1.0 + 1e-9));
        }
    }

    #[test]
    fn scales_with_radius() {
        let a = lambda_estimate(&Manifold::unit_sphere(), 2).unwrap().value;
        let b = lambda_estimate(&Manifold::sphere(3.0).unwrap(), 2).unwrap().value;
        assert!((b / a - 3.0).abs() < 1e-8);
    }

    #[test]
    fn refinement_is_stable() {
        let seq = lambda_sequence(&Manifold::unit_sphere(), &[2, 3]).unwrap();
        assert!(seq[1].delta.unwrap() < 0.05, "{seq:?}");
    }
}
