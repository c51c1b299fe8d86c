use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("line {line}, column `{column}`: `{value}` is not a finite number")]
    NonNumericFeature {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: missing value")]
    MissingValue { line: u64, column: String },
    #[error("domain `{0}` has no samples")]
    EmptyDomain(String),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("invalid sampling ratio {0}: must lie in (0, 1]")]
    InvalidRatio(f64),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class histogram is empty")]
    EmptyHistogram,
    #[error("feature pool is empty")]
    EmptyFeaturePool,
    #[error("features_per_split = {requested} exceeds the feature pool size {pool}")]
    FeaturesPerSplitExceedsPool { requested: usize, pool: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("sample set is empty")]
    EmptySet,
    #[error("need at least {required} domains, found {found}")]
    TooFewDomains { required: usize, found: usize },
    #[error("weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("weight map is empty")]
    EmptyWeights,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error(
        "model format version {found} is not supported (this build reads version {supported})"
    )]
    VersionMismatch { found: u64, supported: u64 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
