use alloc::string::String;
use core::fmt;

/// Errors raised by the detectors, metrics and generators.
#[derive(Clone, Debug, PartialEq)]
pub enum CpdError {
    /// Series construction failed (ragged rows, non-finite values, empty input).
    InvalidSeries(String),
    SeriesTooShortForEmbedding { len: usize, k: usize },
    BatchOutOfRange { t: i64, n: usize },
    InputDimensionMismatch { expected: usize, got: usize },
    BackwardBeforeForward,
    GradientShapeMismatch,
    NonFiniteGradient,
    ClassificationHeadRequired,
    RatioHeadRequired,
    /// A detector or generator configuration violated one of its constraints.
    InvalidConfig(String),
    SeriesShorterThanWarmUp { len: usize, required: usize },
    AlreadyShifted,
    NoTrueChangePoints,
    TooFewObservations,
    InvalidAnnotation(String),
    MissingClassExamples,
    DegenerateCovariance { segment: usize, correlation: f64 },
}

impl fmt::Display for CpdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidSeries(msg) => write!(f, "invalid series: {msg}"),
            Self::SeriesTooShortForEmbedding { len, k } => {
                write!(f, "series too short for embedding (T={len}, k={k})")
            }
            Self::BatchOutOfRange { t, n } => {
                write!(f, "batch window out of range (t={t}, n={n})")
            }
            Self::InputDimensionMismatch { expected, got } => {
                write!(f, "input dimension mismatch (expected {expected}, got {got})")
            }
            Self::BackwardBeforeForward => f.write_str("backward before forward"),
            Self::GradientShapeMismatch => f.write_str("gradient shape does not match parameters"),
            Self::NonFiniteGradient => f.write_str("non-finite gradient"),
            Self::ClassificationHeadRequired => f.write_str("classification head required"),
            Self::RatioHeadRequired => f.write_str("ratio head required"),
            Self::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Self::SeriesShorterThanWarmUp { len, required } => write!(
                f,
                "series shorter than warm-up horizon (T={len}, need at least {required})"
            ),
            Self::AlreadyShifted => f.write_str("score series is already shifted"),
            Self::NoTrueChangePoints => f.write_str("no true change points to evaluate"),
            Self::TooFewObservations => f.write_str("too few observations"),
            Self::InvalidAnnotation(msg) => write!(f, "invalid annotation: {msg}"),
            Self::MissingClassExamples => f.write_str("missing class examples"),
            Self::DegenerateCovariance {
                segment,
                correlation,
            } => write!(
                f,
                "degenerate covariance in segment {segment} (correlation {correlation})"
            ),
        }
    }
}

impl core::error::Error for CpdError {}
