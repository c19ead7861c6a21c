use thiserror::Error;

/// Errors raised by the analytics engine.
///
/// Each variant maps onto a stable machine-readable code (see [`Error::code`])
/// that the CLI embeds in per-cell and per-model outputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },

    #[error("malformed keying: {0}")]
    MalformedKeying(String),

    #[error("malformed covariate table: {0}")]
    MalformedCovariates(String),

    #[error("facet {facet} has standard deviation below 1e-12")]
    DegenerateFacet { facet: usize },

    #[error("vector has zero norm")]
    ZeroNormVector,

    #[error("group {group} has {pairs} pairs, above the exact-mode cap of {cap}")]
    GroupTooLargeForExact { group: String, pairs: u64, cap: u64 },

    #[error("median of log-similarities is zero, diversity index undefined")]
    GpdiUndefined,

    #[error("no positive similarities survive the filter")]
    EmptyPositiveSet,

    #[error("sample needs at least {needed} finite values, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("degenerate variance in {0}")]
    DegenerateVariance(String),

    #[error("ward linkage requires the euclidean metric")]
    MetricLinkageMismatch,

    #[error("every candidate cut is degenerate")]
    SelectionDegenerate,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("need at least {needed} complete rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("predictor {0} is perfectly collinear with the others")]
    PerfectCollinearity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedRecord { .. } => "MALFORMED_RECORD",
            Error::MalformedKeying(_) => "MALFORMED_KEYING",
            Error::MalformedCovariates(_) => "MALFORMED_COVARIATES",
            Error::DegenerateFacet { .. } => "DEGENERATE_FACET",
            Error::ZeroNormVector => "ZERO_NORM_VECTOR",
            Error::GroupTooLargeForExact { .. } => "GROUP_TOO_LARGE_FOR_EXACT",
            Error::GpdiUndefined => "GPDI_UNDEFINED",
            Error::EmptyPositiveSet => "EMPTY_POSITIVE_SET",
            Error::InsufficientSample { .. } => "INSUFFICIENT_SAMPLE",
            Error::DegenerateVariance(_) => "DEGENERATE_VARIANCE",
            Error::MetricLinkageMismatch => "METRIC_LINKAGE_MISMATCH",
            Error::SelectionDegenerate => "SELECTION_DEGENERATE",
            Error::RankDeficient => "RANK_DEFICIENT",
            Error::InsufficientRows { .. } => "INSUFFICIENT_ROWS",
            Error::PerfectCollinearity(_) => "PERFECT_COLLINEARITY",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::Io(_) => "IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
