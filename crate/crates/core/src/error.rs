//! Error type shared across the crate.

/// Convenience alias used by every fallible function in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by statistics, generators, and the experiment engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input collection was empty where at least one element is required.
    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    /// Two inputs that must agree in dimension do not.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// An operation needs a minimum number of observations.
    #[error("{what} needs at least {needed} observations, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// Bandwidth is not a strictly positive finite number.
    #[error("bandwidth must be finite and > 0, got {value}")]
    InvalidBandwidth { value: f64 },

    /// The median heuristic collapsed (all pairwise distances are zero).
    #[error("median heuristic degenerate: all pairwise distances are zero")]
    DegenerateBandwidth,

    /// Derivative order beyond what the closed forms cover.
    #[error("derivative order {order} unsupported (max {max})")]
    UnsupportedOrder { order: usize, max: usize },

    /// Kernel profile derivative evaluated at a point where it blows up.
    #[error("{family} kernel derivative of order {order} is singular at 0")]
    DerivativeSingularity { family: &'static str, order: usize },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The studentizer is zero while the statistic is positive, so no
    /// meaningful z-score exists.
    #[error("variance estimate is zero with a positive statistic")]
    DegenerateVariance,

    /// A closed form was requested whose hypothesis the inputs violate.
    #[error("hypothesis violated: {reason}")]
    HypothesisViolated { reason: String },

    /// A reduced summary lacks a field the requested quantity needs.
    #[error("missing summary field: {field}")]
    MissingSummary { field: &'static str },

    /// A matrix that must be positive semidefinite is not.
    #[error("{what} is not positive semidefinite")]
    NotPositiveSemiDefinite { what: &'static str },

    /// A matrix that must be invertible is numerically singular.
    #[error("{what} is singular")]
    SingularMatrix { what: &'static str },

    /// Too few values for a distributional summary.
    #[error("needs at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    /// Experiment or model configuration is inconsistent.
    #[error("config error: {message}")]
    Config { message: String },

    /// Underlying I/O failure while reading or writing files.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv parse error at line {line}: {message}")]
    CsvFormat { line: usize, message: String },
}

impl Error {
    /// True for errors caused by bad configuration or usage rather than a
    /// numerical condition encountered at runtime. Front ends use this to
    /// pick exit codes.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput { .. }
                | Error::DimensionMismatch { .. }
                | Error::TooFewSamples { .. }
                | Error::InvalidBandwidth { .. }
                | Error::UnsupportedOrder { .. }
                | Error::InvalidParameter { .. }
                | Error::MissingSummary { .. }
                | Error::TooFewValues { .. }
                | Error::Config { .. }
                | Error::CsvFormat { .. }
        )
    }
}
