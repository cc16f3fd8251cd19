use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("oracle scale exceeded: {0}")]
    ScaleExceeded(String),

    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("singular basis encountered during refactorization")]
    SingularBasis,

    #[error("empty anchor set")]
    EmptyAnchors,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dimension mismatch at stage t={stage}, path i={path}: {message}")]
    DataShape {
        stage: usize,
        path: usize,
        message: String,
    },

    #[error("unstable process: spectral radius {0} >= 1")]
    UnstableProcess(f64),

    #[error("degenerate nominal weight at index {0}")]
    DegenerateWeight(usize),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("model error at iteration {iteration}, stage {stage}, node {node}: {message}")]
    Model {
        iteration: usize,
        stage: usize,
        node: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
