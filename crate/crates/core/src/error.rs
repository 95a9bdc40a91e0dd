use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped roughly by the layer that raises them, but callers
/// only ever see this one type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate axis {axis}: {reason}")]
    DegenerateAxis { axis: usize, reason: String },
    #[error("axis {axis} out of range for a {ndim}-dimensional grid")]
    AxisOutOfRange { axis: usize, ndim: usize },
    #[error("density must be strictly positive (node {node} has {value})")]
    NonPositiveDensity { node: usize, value: f64 },
    #[error("metric is singular or not positive definite at node {node}")]
    SingularMetric { node: usize },
    #[error("metric is not symmetric at node {node} (defect {defect:e})")]
    AsymmetricMetric { node: usize, defect: f64 },
    #[error("conformal factor must be positive (node {node} has {value})")]
    NonPositiveConformalFactor { node: usize, value: f64 },
    #[error("dimension {0} is not supported here (need n >= 3)")]
    UnsupportedDimension(usize),
    #[error("ambient has no boundary at the requested end")]
    NoBoundary,
    #[error("ambient end {end} is not a product collar")]
    NonProductEnd { end: usize },
    #[error("collar length {length} is not a multiple of the spacing {spacing}")]
    IncompatibleLength { length: f64, spacing: f64 },
    #[error("graph left the graphical regime: sup|grad u| = {slope} > {limit}")]
    GraphRegimeExceeded { slope: f64, limit: f64 },
    #[error("graph does not fit the ambient chart: {0}")]
    OutOfChart(String),
    #[error("free-boundary condition violated: |du/dt| = {0:e} at the boundary")]
    FreeBoundaryViolated(f64),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("hypersurface is not minimal: sup|H| = {0:e}")]
    NotMinimal(f64),
    #[error("eigen iteration did not converge: {0}")]
    EigenNonConvergence(String),
    #[error("variation is identically zero")]
    ZeroVariation,
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("ground state changes sign (min {min:e}, max {max:e})")]
    SignIndefiniteEigenfunction { min: f64, max: f64 },
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("conformal trials disagree on the sign of lambda_1: {0}")]
    SignDisagreement(String),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: String, cause: String },
    #[error("linear solver failure: {0}")]
    LinearSolve(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
