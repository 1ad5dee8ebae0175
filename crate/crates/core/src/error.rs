use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A spectral parameter or point lies outside the region where the
    /// requested quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("non-finite value {value} at grid node {node} (x = {x})")]
    NonFinite { node: usize, x: f64, value: f64 },

    #[error("fiber determinant is not positive at grid node {node} (x = {x}, value = {value:e})")]
    PositivityViolation { node: usize, x: f64, value: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
