use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can surface.
///
/// Each variant maps to a stable short code (see [`Error::code`]) that the
/// command-line front end prints as `ERROR <code>: <detail>`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed npy header: {0}")]
    MalformedHeader(String),

    #[error("unsupported dtype {0:?} (expected '<f4' or '<f8')")]
    UnsupportedDtype(String),

    #[error("fortran-ordered arrays are not supported")]
    FortranOrder,

    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("{0}")]
    Shape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("duplicate clip id {0:?}")]
    DuplicateClipId(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("{field} = {value} for clip {clip:?} is outside [-1, 1]")]
    ValueOutOfRange {
        clip: String,
        field: &'static str,
        value: f64,
    },

    #[error("clip {0:?} has neither a complete valence/arousal pair nor a label")]
    IncompleteRecord(String),

    #[error("unknown clip id {0:?}")]
    UnknownClipId(String),

    #[error("{encoder}: {rows} embedding rows but {expected} manifest records and no .ids sidecar")]
    RowCountMismatch {
        encoder: String,
        rows: usize,
        expected: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {required} samples, have {count}")]
    InsufficientSamples { required: usize, count: usize },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is indefinite (eigenvalue {min_eigenvalue:e} below -tol * |M|)")]
    IndefiniteMatrix { min_eigenvalue: f64 },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("covariance square root failed and regularization is disabled")]
    SingularCovariance,

    #[error("Frechet distance came out negative ({0:e})")]
    NegativeDistance(f64),

    #[error("clips without a usable label: {}", .0.join(", "))]
    MissingLabel(Vec<String>),

    #[error("need at least 2 groups to form pairs, found {0}")]
    TooFewGroups(usize),

    #[error("group {group:?} has {count} clip(s); at least 2 are required")]
    GroupTooSmall { group: String, count: usize },

    #[error("no embedding for clip {clip:?} under encoder {encoder:?}")]
    MissingEmbedding { clip: String, encoder: String },

    #[error("empty input")]
    EmptyInput,

    #[error("pair sets differ between reports ({0})")]
    PairSetMismatch(String),

    #[error("targets have zero variance")]
    ZeroVariance,

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("covariance is not positive semi-definite")]
    NotPsd,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-parsable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedHeader(_) => "malformed_header",
            Error::UnsupportedDtype(_) => "unsupported_dtype",
            Error::FortranOrder => "fortran_order",
            Error::TruncatedData { .. } => "truncated_data",
            Error::NonFinite { .. } => "non_finite",
            Error::Shape(_) => "shape",
            Error::Parse(_) => "parse",
            Error::DuplicateClipId(_) => "duplicate_clip_id",
            Error::MissingColumn(_) => "missing_column",
            Error::ValueOutOfRange { .. } => "value_out_of_range",
            Error::IncompleteRecord(_) => "incomplete_record",
            Error::UnknownClipId(_) => "unknown_clip_id",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::IndefiniteMatrix { .. } => "indefinite_matrix",
            Error::EigenFailure => "eigen_failure",
            Error::SingularCovariance => "singular_covariance",
            Error::NegativeDistance(_) => "negative_distance",
            Error::MissingLabel(_) => "missing_label",
            Error::TooFewGroups(_) => "too_few_groups",
            Error::GroupTooSmall { .. } => "group_too_small",
            Error::MissingEmbedding { .. } => "missing_embedding",
            Error::EmptyInput => "empty_input",
            Error::PairSetMismatch(_) => "pair_set_mismatch",
            Error::ZeroVariance => "zero_variance",
            Error::SingularSystem => "singular_system",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::NotPsd => "not_psd",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Json(_) => "json",
        }
    }
}
