//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Error`]; variants are
//! grouped by the stage that raises them (input validation, Gaussian
//! decomposition, analytic hypotheses, quadrature, Monte Carlo, parsing).

/// Errors raised by spectrum construction, numerical evaluation, and parsing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A spectrum must contain at least one weight.
    #[error("spectrum has no components")]
    EmptySpectrum,

    /// All weights must be strictly positive.
    #[error("weight at index {index} is {value}, but weights must be > 0")]
    NonPositiveWeight { index: usize, value: f64 },

    /// Weight and shift vectors must have equal length.
    #[error("{weights} weights but {shifts} shifts; the vectors must have equal length")]
    LengthMismatch { weights: usize, shifts: usize },

    /// NaN or infinity in numeric input.
    #[error("non-finite input: {context}")]
    NonFiniteInput { context: &'static str },

    /// Rescaling factor must be strictly positive and finite.
    #[error("scale factor is {value}, but must be finite and > 0")]
    NonPositiveScale { value: f64 },

    /// A variance-based bound needs a strictly positive variance.
    #[error("variance is {value}, but must be finite and > 0")]
    NonPositiveVariance { value: f64 },

    /// Covariance input is not symmetric within tolerance.
    #[error("covariance matrix is not symmetric: |S[{i}][{j}] - S[{j}][{i}]| = {delta:e}")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    /// Covariance input has an eigenvalue below -tolerance.
    #[error("covariance matrix has negative eigenvalue {value:e} (tolerance {tol:e})")]
    NegativeEigenvalue { value: f64, tol: f64 },

    /// Covariance matrix is identically zero: no quadratic part remains.
    #[error("covariance matrix is zero; the squared norm is deterministic")]
    AllZeroCovariance,

    /// An analytic bound was requested outside its hypothesis.
    #[error("hypothesis violated: {context}")]
    HypothesisViolated { context: String },

    /// The envelope-based tail cutoff needs at least three weights.
    #[error("tail cutoff needs at least 3 weights, spectrum has {n}")]
    TooFewTerms { n: usize },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge: {context} (error estimate {estimate:e}, target {target:e})")]
    NonConvergedQuadrature {
        context: &'static str,
        estimate: f64,
        target: f64,
    },

    /// Invalid evaluation configuration.
    #[error("invalid configuration: {context}")]
    InvalidConfig { context: &'static str },

    /// Monte Carlo input was empty or degenerate.
    #[error("degenerate sample: {context}")]
    DegenerateSample { context: &'static str },

    /// Malformed spectrum CSV or sweep description.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
