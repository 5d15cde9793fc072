use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("coefficient matrix is not elliptic (lambda = {lambda:.6e})")]
    NotElliptic { lambda: f64 },

    #[error("eigenvector matrix is ill-conditioned (condition number {condition:.3e}); use the quadrature path")]
    IllConditioned { condition: f64 },

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("symbol is undefined at eigenvalue {0}")]
    SingularSymbol(Complex64),

    #[error("{what} did not converge (achieved residual {residual:.3e})")]
    Accuracy { what: String, residual: f64 },

    #[error("Mellin truncation at U = {truncation} leaves an estimated tail of {tail:.3e}; suggested U = {suggested:?}")]
    Truncation {
        truncation: f64,
        tail: f64,
        suggested: Option<f64>,
    },

    #[error("subordination bound diverges: growth rate {growth:.6} is not below the Mellin decay rate {decay:.6}")]
    DivergentBound { growth: f64, decay: f64 },

    #[error("operators live on different grids or boundary conditions: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
