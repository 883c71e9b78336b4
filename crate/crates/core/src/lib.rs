//! Numerical laboratory for Hermitian bundles: transport, holonomy, gauge fixing
//! and curvature bounds on model manifolds.

// `!(x >= 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ucalc;

pub use error::{GaugeError, Result};
pub use ucalc::{AntiHermitian, CMat, Unitary, C64};
pub mod geometry;
pub mod util;
pub mod bundle;
pub mod transport;
pub mod gauge;
pub mod coulomb;
pub mod experiments;

pub use bundle::{BundleAtlas, ConnectionModel};
pub use coulomb::{DecOperators, LambdaEstimate, MatrixCochain};
pub use experiments::{KAreaBound, Report, ScenarioConfig};
pub use gauge::{Certificate, FlattenPlan, GaugeTrivialization};
pub use geometry::{Manifold, PathCurve, Point, SimplicialComplex, Tangent};
