use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while fitting, scoring, evaluating or doing I/O.
///
/// Every variant maps to a stable machine-readable code (see [`Error::code`]),
/// which the command-line tool prints on its diagnostic stream.
#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {min} shapes, got {n}")]
    TooFewShapes { n: usize, min: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("coordinate vector of length {0} is not a whole number of (x, y, z) triples")]
    NotTriples(usize),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("all shapes are identical; the sample covariance has no nonzero eigenvalue")]
    DegenerateSpectrum,

    #[error("latent dimension {d} outside [{min}, {max}]")]
    DimOutOfRange { d: usize, min: usize, max: usize },

    #[error("explained-variance ratio {0} outside (0, 1]")]
    InvalidRatio(f64),

    #[error("latent dimension {requested} exceeds the numerical rank {rank} of the training data")]
    RankDeficient { requested: usize, rank: usize },

    #[error("expected a vector of length {expected}, got {found}{}", id.as_ref().map(|i| format!(" (shape `{i}`)")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        id: Option<String>,
    },

    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },

    #[error("labels contain a single class; AUC needs both")]
    SingleClass,

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid generator spec: {0}")]
    SpecInvalid(String),

    #[error("rating {rating} outside [1, {categories}] (subject `{subject}`, rater `{rater}`)")]
    RatingRange {
        subject: String,
        rater: String,
        rating: i64,
        categories: usize,
    },

    #[error("invalid ratings: {0}")]
    InvalidRatings(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no particle files found in {0}")]
    NoInput(PathBuf),

    #[error("`{id}` has {found} particles, expected {expected}")]
    ParticleCountMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported model format: {0}")]
    ModelVersion(String),

    #[error("ids do not match: {0}")]
    IdMismatch(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Stable error code, e.g. `E_DIM_MISMATCH`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TooFewShapes { .. } => "E_TOO_FEW_SHAPES",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::NotTriples(_) => "E_NOT_TRIPLES",
            Error::DuplicateId(_) => "E_DUPLICATE_ID",
            Error::DegenerateSpectrum => "E_DEGENERATE_SPECTRUM",
            Error::DimOutOfRange { .. } => "E_DIM_OUT_OF_RANGE",
            Error::InvalidRatio(_) => "E_INVALID_RATIO",
            Error::RankDeficient { .. } => "E_RANK_DEFICIENT",
            Error::DimensionMismatch { .. } => "E_DIM_MISMATCH",
            Error::LengthMismatch(..) => "E_LENGTH_MISMATCH",
            Error::TooFewObservations { .. } => "E_TOO_FEW_OBSERVATIONS",
            Error::SingleClass => "E_SINGLE_CLASS",
            Error::ZeroVariance => "E_ZERO_VARIANCE",
            Error::InvalidModel(_) => "E_MODEL_INVALID",
            Error::SpecInvalid(_) => "E_SPEC_INVALID",
            Error::RatingRange { .. } => "E_RATING_RANGE",
            Error::InvalidRatings(_) => "E_RATINGS_INVALID",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::NoInput(_) => "E_NO_INPUT",
            Error::ParticleCountMismatch { .. } => "E_PARTICLE_COUNT_MISMATCH",
            Error::Parse { .. } => "E_PARSE",
            Error::ModelVersion(_) => "E_MODEL_VERSION",
            Error::IdMismatch(_) => "E_ID_MISMATCH",
            Error::Config { .. } => "E_CONFIG",
            Error::Io { .. } => "E_IO",
            Error::Csv { .. } => "E_CSV",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
