use thiserror::Error;

use crate::coupler::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("global best is undefined")]
    UndefinedGlobalBest,

    #[error("fitness evaluated to NaN")]
    NanFitness,

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mass matrix entry {index} is not positive ({value})")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("path length must be positive, got {0}")]
    NonPositivePathLength(f64),

    #[error("trajectory diverged at leapfrog step {step}")]
    Divergence { step: usize },

    #[error("label {label} at row {row} is outside [0, {num_classes})")]
    LabelOutOfRange { row: usize, label: i64, num_classes: usize },

    #[error("length penalty 10^-{k} * {length} is not below 1")]
    LengthPenaltyOverflow { k: u32, length: u64 },

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training batch {batch}: {source}")]
    Batch {
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable name for the error class, used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) | Error::NonPositiveMass { .. } | Error::NonPositivePathLength(_) => "config",
            Error::UndefinedGlobalBest => "undefined-best",
            Error::NanFitness => "nan-fitness",
            Error::NonFinite(_) => "non-finite",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Divergence { .. } => "divergence",
            Error::LabelOutOfRange { .. } => "label",
            Error::LengthPenaltyOverflow { .. } => "length-scale",
            Error::UnknownObjective(_) => "objective",
            Error::Parse { .. } => "parse",
            Error::Batch { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

/// A run that aborted part-way. The trace holds every iteration completed
/// before the failure.
#[derive(Debug, Error)]
#[error("run aborted after {} iterations: {error}", partial.records.len())]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Box<RunTrace>,
}
