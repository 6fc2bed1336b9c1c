use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigen-solver did not converge within {max_iters} sweeps")]
    EigenNonConvergence { max_iters: usize },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("POVM effect is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    EffectNotPsd { min_eigenvalue: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("log-likelihood is -inf at this state (outcome {outcome} has zero probability)")]
    ZeroProbability { outcome: usize },

    #[error("Hessian is not negative definite (largest eigenvalue {max_eigenvalue:e})")]
    NotNegativeDefinite { max_eigenvalue: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("boundary slope df/dx must be negative, got {0}")]
    NonNegativeBoundarySlope(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not reach tolerance {rel_tol:e} within {max_panels} panels (error estimate {error:e})")]
    QuadratureFailure { rel_tol: f64, max_panels: usize, error: f64 },

    #[error("optimality certificate failed: {0}")]
    CertificateFailed(String),

    #[error("spectral gap {gap:e} does not exceed tolerance {tol:e}")]
    DegenerateGap { gap: f64, tol: f64 },

    #[error("tangent-space Fisher matrix is not positive definite")]
    FisherNotPositiveDefinite,

    #[error("effective sample size {ess:.1} is below the required {min}")]
    InsufficientEss { ess: f64, min: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
