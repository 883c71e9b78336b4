use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{coclosed_from_potential, DecOperators, LambdaEstimate, MatrixCochain};
use crate::error::Result;
use crate::ucalc::{self, CMat, C64};

/// Allowed discretization slack on both inequalities.
pub const LEMMA_SLACK: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallConnectionReport {
    pub lambda: f64,
    pub form_comass: f64,
    pub d_comass: f64,
    pub curvature_comass: f64,
    pub coclosed_residual: f64,
    /// Which hypothesis failed, if any; the inequalities are then not asserted.
    pub hypothesis_not_met: Option<String>,
    /// |A| / (2 lambda |R|)
    pub form_ratio: f64,
    /// |dA| / (2 |R|)
    pub d_ratio: f64,
    /// Slack needed beyond the exact inequalities (0 when both hold outright).
    pub slack_needed: f64,
    pub holds: bool,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// |A| <= 2 lambda |R| and |dA| <= 2 |R| for a coclosed cochain A with R = dA + A^A.
pub fn small_connection_check(ops: &DecOperators, a: &MatrixCochain, lambda: &LambdaEstimate) -> Result<SmallConnectionReport> {
    let lam = lambda.value;
    let residual = ops.coclosed_residual(a)?;
    let form = ops.comass1(a);
    let da = ops.comass2(&ops.d1(a)?);
    let curv = ops.comass2(&ops.curvature_cup(a)?);
    let hypothesis_not_met = if residual >= 1e-8 {
        Some(format!("d*A residual {residual:.3e} >= 1e-8"))
    } else if form > 1.0 / (4.0 * lam) {
        Some(format!("|A| = {form:.4e} > 1/(4 lambda)"))
    } else if curv >= 1.0 / (8.0 * lam * lam) {
        Some(format!("|R| = {curv:.4e} >= 1/(8 lambda^2)"))
    } else {
        None
    };
    let form_ratio = ratio(form, 2.0 * lam * curv);
    let d_ratio = ratio(da, 2.0 * curv);
    let slack_needed = (form_ratio.max(d_ratio) - 1.0).max(0.0);
    Ok(SmallConnectionReport {
        lambda: lam,
        form_comass: form,
        d_comass: da,
        curvature_comass: curv,
        coclosed_residual: residual,
        holds: hypothesis_not_met.is_some() || slack_needed <= LEMMA_SLACK,
        hypothesis_not_met,
        form_ratio,
        d_ratio,
        slack_needed,
    })
}

/// Coclosed cochain from a random polynomial face potential of degree <= 3 in
/// the ambient coordinates, so that it resolves on coarse meshes.
pub fn random_coclosed<R: Rng + ?Sized>(ops: &DecOperators, rank: usize, rng: &mut R) -> Result<MatrixCochain> {
    let mut monomials = Vec::new();
    for i in 0..=3usize {
        for j in 0..=(3 - i) {
            for k in 0..=(3 - i - j) {
                if i + j + k > 0 {
                    monomials.push(([i as i32, j as i32, k as i32], ucalc::random_anti_hermitian(rng, rank)));
                }
            }
        }
    }
    let values: Vec<CMat> = (0..ops.face_areas().len())
        .map(|f| {
            let p = ops.mesh().face_positions(f);
            let c = (p[0] + p[1] + p[2]) / 3.0;
            let mut v = ucalc::zeros(rank);
            for (e, m) in &monomials {
                v += m * C64::new(c[0].powi(e[0]) * c[1].powi(e[1]) * c[2].powi(e[2]), 0.0);
            }
            v * C64::new(ops.face_areas()[f], 0.0)
        })
        .collect();
    coclosed_from_potential(ops, &MatrixCochain::from_values(2, rank, values))
}

/// Rescales a cochain so that |dA| = fraction / (8 lambda^2) and |A| <= fraction / (4 lambda).
pub fn scale_into_hypotheses(ops: &DecOperators, a: &MatrixCochain, lambda: f64, fraction: f64) -> Result<MatrixCochain> {
    let da = ops.comass2(&ops.d1(a)?);
    let form = ops.comass1(a);
    if da == 0.0 || form == 0.0 {
        return Ok(a.clone());
    }
    let t = (fraction / (8.0 * lambda * lambda * da)).min(fraction / (4.0 * lambda * form));
    Ok(a.scaled(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// (t, |R(tA)|, (2t - t^2) / (8 lambda^2))
    pub samples: Vec<(f64, f64, f64)>,
    pub holds: bool,
}

/// Curvature along the segment tA, t in [0, 1], against (2t - t^2)/(8 lambda^2) with 10% slack.
pub fn contraction_check(ops: &DecOperators, a: &MatrixCochain, lambda: &LambdaEstimate, steps: usize) -> Result<ContractionReport> {
    let lam = lambda.value;
    let mut samples = Vec::new();
    let mut holds = true;
    for k in 1..=steps.max(1) {
        let t = k as f64 / steps.max(1) as f64;
        let r = ops.comass2(&ops.curvature_cup(&a.scaled(t))?);
        let bound = (2.0 * t - t * t) / (8.0 * lam * lam);
        holds &= r <= bound * (1.0 + LEMMA_SLACK);
        samples.push((t, r, bound));
    }
    Ok(ContractionReport { samples, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coulomb::lambda::lambda_on;
    use crate::geometry::{Manifold, SimplicialComplex};
    use rand::SeedableRng;

    #[test]
    fn zero_cochain() {
        let ops = DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), 1).unwrap()).unwrap();
        let lam = lambda_on(&ops, 1).unwrap();
        let r = small_connection_check(&ops, &MatrixCochain::zeros(1, 2, ops.edge_lengths().len()), &lam).unwrap();
        assert!(r.holds && r.hypothesis_not_met.is_none());
        assert_eq!(r.slack_needed, 0.0);
    }

    #[test]
    fn random_small_coclosed_cochains() {
        let ops = DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), 2).unwrap()).unwrap();
        let lam = lambda_on(&ops, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let a = random_coclosed(&ops, 2, &mut rng).unwrap();
            let a = scale_into_hypotheses(&ops, &a, lam.value, 0.5).unwrap();
            let r = small_connection_check(&ops, &a, &lam).unwrap();
            assert!(r.hypothesis_not_met.is_none(), "{r:?}");
            assert!(r.holds, "{r:?}");
            assert!(contraction_check(&ops, &a, &lam, 5).unwrap().holds);
        }
    }
}
