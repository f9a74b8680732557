use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("divergent Gaussian integral: real part has eigenvalue {eigenvalue:e}")]
    Divergent { eigenvalue: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}, tolerance {tolerance:e}")]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("vertex constraint violated on external corners (residual {residual:e})")]
    Constraint { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
