//! Error types shared by all modules.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad resolution, nonpositive lengths, p < 1, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched grids, fiber dimensions or degree-of-freedom spaces.
    #[error("shape error: {0}")]
    Shape(String),

    /// A weight field failed positivity or a related domain precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (factorization breakdown, rank deficiency).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A requested index, cluster or basis element does not exist.
    #[error("range error: {0}")]
    Range(String),

    /// The requested eigenvalue window exceeds the reliable part of the
    /// discrete spectrum; `reliable_k_max` is the largest trustworthy index.
    #[error("truncation error: requested window exceeds the reliable spectrum, reliable k_max = {reliable_k_max}")]
    Truncation { reliable_k_max: usize },

    /// The computation finished but the result contradicts an a priori
    /// expectation (kernel-dimension mismatch, ambiguous kernel boundary,
    /// cluster straddling); usually resolved by increasing the resolution.
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    /// The dual Rayleigh quotient is undefined because the field is
    /// (numerically) a harmonic spinor.
    #[error("near-kernel error: {0}")]
    NearKernel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
