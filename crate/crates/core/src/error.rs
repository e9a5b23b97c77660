use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("signature violation: {positive} positive and {negative} negative eigenvalues, at most {n} of each allowed")]
    SignatureViolation {
        positive: usize,
        negative: usize,
        n: usize,
    },

    #[error("spin dimension n={n} with f={f} is not supported (need f >= 2n and n >= 1)")]
    DimensionTooSmall { n: usize, f: usize },

    #[error("operation requires n={expected}, got n={got}")]
    UnsupportedSpin { expected: usize, got: usize },

    #[error("operation requires f={expected}, got f={got}")]
    UnsupportedDimension { expected: usize, got: usize },

    #[error("Bloch length tau={tau} is below 1")]
    TauBelowOne { tau: f64 },

    #[error("eigensolver failed to converge for pair ({i}, {j})")]
    EigensolverFailure { i: usize, j: usize },

    #[error("eigenvalue sum vanishes at point {point}")]
    DegenerateTrace { point: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("construction is defined for spin dimension one, got n={n}")]
    NotSpinOne { n: usize },

    #[error("image of the reference operator is not two-dimensional")]
    DegenerateImage,

    #[error("configuration is not causally trivial ({pairs} timelike pairs)")]
    NotCausallyTrivial { pairs: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line search failed after {trials} trials")]
    LineSearchFailure { trials: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
