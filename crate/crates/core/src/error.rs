use thiserror::Error;

pub type Result<T, E = GaugeError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("invalid geometry parameter: {0}")]
    InvalidGeometry(String),
    #[error("geometry not supported for this operation: {0}")]
    UnsupportedGeometry(String),
    #[error("minimal geodesic is not unique between the given points")]
    NonUniqueGeodesic,
    #[error("points are farther apart than the injectivity radius ({distance} >= {radius})")]
    BeyondInjectivityRadius { distance: f64, radius: f64 },
    #[error("path segments are not continuous (gap {0:.3e})")]
    DiscontinuousPath(f64),

    #[error("matrix is not anti-Hermitian (drift {0:.3e})")]
    NotAntiHermitian(f64),
    #[error("matrix is not unitary (drift {0:.3e})")]
    NotUnitary(f64),
    #[error("unitary is outside the logarithm domain: |U - Id| = {0:.6} >= 2 sin(1/4)")]
    OutsideLogDomain(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("point lies outside every chart domain")]
    ChartDomainError,
    #[error("finite-difference curvature did not settle (mismatch {0:.3e})")]
    InsufficientlySmooth(f64),
    #[error("bundles live over different base manifolds")]
    BaseMismatch,
    #[error("map not supported: {0}")]
    UnsupportedMap(String),
    #[error("cover not supported: {0}")]
    UnsupportedCover(String),
    #[error("base is not a closed surface")]
    NonClosedSurface,
    #[error("bundle atlas cannot be serialized: {0}")]
    NotSerializable(String),
    #[error("bundle document error: {0}")]
    Document(String),

    #[error("transport step too coarse: refinements differ by {0:.3e}")]
    StepTooCoarse(f64),
    #[error("operation requires a rank-1 bundle, got rank {0}")]
    RankNotOne(usize),
    #[error("curvature flux too large for the sine bound: {0:.4} >= pi")]
    FluxTooLarge(f64),

    #[error("radius {radius} not below the admissible bound {bound}")]
    RadiusTooLarge { radius: f64, bound: f64 },
    #[error("curvature comass {0:.5} is not below 1/13")]
    CurvatureTooLarge(f64),
    #[error("transition holonomy left the logarithm domain: |g12 - Id| = {0:.5}")]
    LogDomainError(f64),
    #[error("gauge charts do not cover the atlas charts")]
    CoverageMismatch,
    #[error("flatten plan profile invalid: {0}")]
    PlanProfileInvalid(String),
    #[error("inner gauge carries no certificate")]
    GaugeNotCertified,

    #[error("invalid simplicial complex: {0}")]
    InvalidComplex(String),
    #[error("first cohomology is nonzero (dimension {0})")]
    NonzeroFirstCohomology(usize),
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("optimizer stalled at {best:.6}")]
    OptimizerStalled { best: f64 },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GaugeError {
    fn from(e: std::io::Error) -> Self {
        GaugeError::Io(e.to_string())
    }
}
