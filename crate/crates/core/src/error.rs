use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigendecomposition did not converge within {sweeps} Jacobi sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("evaluation point {value} outside knot span [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("difference order {order} must be positive and smaller than basis size {k}")]
    InvalidOrder { order: usize, k: usize },
    #[error("degenerate scaling range: max gamma - min gamma = {span:.3e}")]
    DegenerateRange { span: f64 },
    #[error("syntax error at byte {offset}: expected {expected}")]
    SyntaxError { offset: usize, expected: String },
    #[error("model contains more than one spline node f(...)")]
    MultipleSplineNodes,
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound name '{0}' in model expression")]
    UnboundName(String),
    #[error("missing column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("parse error at data row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("inner Newton solve diverged: gradient norm {grad_norm:.3e} after {iterations} iterations")]
    InnerDivergence { iterations: usize, grad_norm: f64 },
    #[error("Hessian of the joint density at the mode is not positive definite")]
    IndefiniteModeHessian,
    #[error("singular design in starting-value regression")]
    SingularDesign,
    #[error("observed information is singular (minimum eigenvalue {floor:.3e})")]
    SingularInformation { floor: f64 },
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
