use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("environment `{0}` has continuous state or actions and no tabular form")]
    NotTabular(String),

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("no feasible trajectory under the given feasibility indicator")]
    EmptyFeasibleSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "feature mismatch: constraint net reads dimensions {missing:?} but the target pair vector only has {available}"
    )]
    FeatureMismatch { missing: Vec<usize>, available: usize },

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("no metrics files found under {0}")]
    EmptyRunDir(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
