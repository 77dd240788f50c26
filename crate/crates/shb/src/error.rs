//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
///
/// Variants are grouped by the layer that raises them; several are reused
/// across layers (for example [`Error::NoSignChange`] is raised both by the
/// event locator and by any bisection wrapper built on top of it).
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state, parameter, or sample contained a NaN or infinity.
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),

    /// f'(0) < 0, so the threshold 2*sqrt(f'(0)) is undefined.
    #[error("f'(0) = {0} is negative; the threshold 2*sqrt(f'(0)) is undefined")]
    NegativeDerivative(f64),

    /// No step succeeded from the initial state before the step size
    /// underflowed.
    #[error("no accepted step from the initial state at s = {s}; step size underflowed")]
    StepUnderflowAtStart { s: f64 },

    /// An event bracket whose endpoint values have the same sign.
    #[error("event function does not change sign over [{a}, {b}]")]
    NoSignChange { a: f64, b: f64 },

    /// The trajectory is identically zero, so no critical-point structure
    /// exists.
    #[error("trajectory is identically zero; nothing to extract")]
    TrivialSolution,

    /// Not even one full rung (extremum, zero, third-derivative zero,
    /// second-derivative zero, next extremum) was found.
    #[error("no complete rung found in the trajectory")]
    NoCompleteRung,

    /// Fewer rungs than a diagnostic needs.
    #[error("{got} rungs available, at least {need} required")]
    InsufficientRungs { got: usize, need: usize },

    /// The fitted gap ratio is >= 1: the rung gaps are not contracting, so
    /// no finite-abscissa tail bound exists.
    #[error("fitted gap ratio {ratio} >= 1: gaps are not contracting")]
    NoContraction { ratio: f64 },

    /// The shot escaped (or ran out of horizon) before its first critical
    /// point, so the shooting function is undefined there.
    #[error("no first critical point: trajectory left the window at s = {s}")]
    NoFirstCriticalPoint { s: f64 },

    /// The shooting scan found no sign change over the whole amplitude grid,
    /// including the decade expansions.
    #[error("shooting function has a single sign over amplitudes [{a_min}, {a_max}]")]
    BracketingFailed { a_min: f64, a_max: f64 },

    /// A post-construction consistency check failed.
    #[error("validation failed: {0}")]
    ValidationFailed(String),

    /// The half wave handed to the symmetric extension does not end at a
    /// point of symmetry (odd derivatives too large at the joint).
    #[error("symmetry mismatch {mismatch:e} at the joint exceeds {limit:e}")]
    SymmetryViolation { mismatch: f64, limit: f64 },

    /// The characteristic roots coincide or turn complex: k <= 2*sqrt(f'(0)).
    #[error("degenerate characteristic roots: k = {k} <= 2*sqrt(f'(0)) = {threshold}")]
    DegenerateRoots { k: f64, threshold: f64 },

    /// Parameter outside the domain of the classical change of variables.
    #[error("mu = {0} is outside the accepted domain")]
    OutOfDomain(f64),

    /// Any other precondition violation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
