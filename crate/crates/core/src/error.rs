use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigensolver did not converge (dim {dim}, max |entry| {max_abs:.3e})")]
    NoConvergence { dim: usize, max_abs: f64 },
    #[error("function evaluation failed at eigenvalue {0}")]
    Evaluation(f64),
    #[error("resolvent point {0} lies on the real axis")]
    RealResolventPoint(f64),
    #[error("Schatten exponent {0} is below 1")]
    SchattenExponent(f64),
    #[error("derivative order {needed} exceeds the available budget {available}")]
    DerivativeBudget { needed: usize, available: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("spectral shift function does not vanish outside the hull (residual {0:.3e})")]
    HullVanishing(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, OpError>;
