//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library surface.
#[derive(Debug, Error)]
pub enum Error {
    /// A plausibility vector violated its invariants (length, range, finiteness).
    #[error("invalid plausibility vector: {0}")]
    InvalidPlausibility(String),

    /// A class index referenced a class outside the frame.
    #[error("invalid subset: class index {index} out of range for {num_classes} classes")]
    InvalidSubset { index: usize, num_classes: usize },

    /// A pairwise operation was asked for a class paired with itself.
    #[error("invalid pair: class indices must differ, both were {index}")]
    InvalidPair { index: usize },

    /// Full power-set enumeration was requested for a frame too large to enumerate.
    #[error("enumeration limit: {num_classes} classes exceeds the 2^K guard of {max_classes}")]
    EnumerationLimit { num_classes: usize, max_classes: usize },

    /// Uncertainty collapsed to (near) zero, so Dirichlet parameters are undefined.
    #[error("degenerate opinion: uncertainty {uncertainty:e} is below the {epsilon:e} floor")]
    DegenerateOpinion { uncertainty: f64, epsilon: f64 },

    /// A mass-algebra identity failed beyond rounding tolerance.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    /// An input had a different dimension than the model or dataset expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at step {step}: {reason}")]
    DivergedTraining { step: usize, reason: String },

    /// A metric is undefined for the given inputs (e.g. single-class AUROC).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A configuration value violated its documented invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Probe circle radius does not clear the class means.
    #[error("probe radius {radius} too small: must exceed {required}")]
    ProbeRadiusTooSmall { radius: f64, required: f64 },

    /// A persisted model or dataset file failed to parse or verify.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
