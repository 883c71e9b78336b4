//! Discrete exterior calculus on triangulated closed surfaces, the constant
//! lambda = sup |a| / |da| over coclosed 1-forms, and Coulomb gauge fixing of
//! matrix-valued discrete connections.
//!
//! A 1-cochain value A_e is the integral of the connection form over the
//! oriented edge e; the edge transport is exp(-A_e).

mod dec;
mod lambda;
mod lemma;
mod project;

use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};
use crate::ucalc::{self, CMat};

pub use dec::{DecOperators, PinnedSolver};
pub use lambda::{coclosed_from_potential, lambda_estimate, lambda_on, lambda_sequence, LambdaEstimate};
pub use lemma::{contraction_check, small_connection_check, random_coclosed, scale_into_hypotheses, ContractionReport, SmallConnectionReport, LEMMA_SLACK};
pub use project::{coulomb_project, coulomb_project_abelian, coulomb_project_from, gauge_action, CoulombConfig, CoulombResult};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCochain {
    degree: usize,
    rank: usize,
    values: Vec<CMat>,
}

impl MatrixCochain {
    pub fn new(degree: usize, rank: usize, values: Vec<CMat>) -> Result<Self> {
        if degree > 2 {
            return Err(GaugeError::PreconditionViolated(format!("cochain degree {degree}")));
        }
        for v in &values {
            if v.nrows() != rank || v.ncols() != rank {
                return Err(GaugeError::PreconditionViolated("cochain value of wrong size".into()));
            }
            let drift = ucalc::max_abs(&(v + v.adjoint()));
            if drift > 1e-10 * (1.0 + ucalc::max_abs(v)) {
                return Err(GaugeError::NotAntiHermitian(drift));
            }
        }
        Ok(MatrixCochain { degree, rank, values })
    }

    pub(crate) fn from_values(degree: usize, rank: usize, values: Vec<CMat>) -> Self {
        MatrixCochain { degree, rank, values }
    }

    pub fn zeros(degree: usize, rank: usize, len: usize) -> Self {
        MatrixCochain { degree, rank, values: vec![ucalc::zeros(rank); len] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        let z = ucalc::C64::new(s, 0.0);
        MatrixCochain { degree: self.degree, rank: self.rank, values: self.values.iter().map(|v| v * z).collect() }
    }

    pub fn add(&self, other: &MatrixCochain) -> Result<Self> {
        if other.degree != self.degree || other.rank != self.rank || other.len() != self.len() {
            return Err(GaugeError::PreconditionViolated("cochain shapes differ".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(MatrixCochain { degree: self.degree, rank: self.rank, values })
    }

    /// Largest entrywise operator-norm difference.
    pub fn distance(&self, other: &MatrixCochain) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| ucalc::op_norm(&(a - b))).fold(0.0, f64::max)
    }

    pub(crate) fn expect_degree(&self, degree: usize) -> Result<()> {
        if self.degree != degree {
            return Err(GaugeError::PreconditionViolated(format!(
                "expected a {degree}-cochain, got degree {}",
                self.degree
            )));
        }
        Ok(())
    }
}

/// Serializable summary of a cochain for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CochainSummary {
    pub degree: usize,
    pub rank: usize,
    pub len: usize,
    pub comass: f64,
}
