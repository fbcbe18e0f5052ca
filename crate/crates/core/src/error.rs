use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the atlas pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NonSquare { rows: usize, row: usize, cols: usize },

    #[error("at least 3 ROIs are required, got {0}")]
    TooFewRois(usize),

    #[error("invalid connectome: {0}")]
    InvalidConnectome(String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("graph has no positive edge")]
    DegenerateGraph,

    #[error("power iteration did not converge in {0} iterations")]
    ConvergenceFailure(usize),

    #[error("node {0} has a vanishing average topology; normalization kernel would be singular")]
    DegenerateNode(usize),

    #[error("cannot form {clusters} clusters from {subjects} subjects")]
    TooFewSubjects { subjects: usize, clusters: usize },

    #[error("invalid kernel bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("subject weight {0:e} is too small to invert")]
    VanishingWeight(f64),

    #[error("normalization kernel is singular at node {0}")]
    SingularKernel(usize),

    #[error("neighbor count {q} out of range 1..={max}")]
    InvalidNeighborCount { q: usize, max: usize },

    #[error("cross-diffusion needs at least 2 subjects, got {0}")]
    PopulationTooSmall(usize),

    #[error("atlases were estimated with different kernel modes ({0} vs {1})")]
    ModeMismatch(String, String),

    #[error("edge ({k}, {l}) out of range for {r} ROIs")]
    IndexOutOfRange { k: usize, l: usize, r: usize },

    #[error("class {label:?} has {count} subjects, fewer than the {folds} folds requested")]
    ClassTooSmall { label: String, count: usize, folds: usize },

    #[error("no discriminative edges: the class atlases do not differ")]
    NoDiscriminativeEdges,

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
