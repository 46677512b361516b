//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("relation {0:?} is not in the vocabulary")]
    UnknownRelation(String),

    #[error("knowledge source is empty")]
    EmptyKnowledge,

    #[error("no knowledge to score")]
    NoKnowledgeToScore,

    #[error("knowledge source unresolvable: no ranked pattern has a matching head")]
    UnresolvableLabel,

    #[error("{path}:{line}: {message}")]
    TripletFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("knowledge feature undefined for fully masked pattern")]
    MaskedTailUndefined,

    #[error("projection maps this input to the zero vector")]
    DegenerateProjection,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("no question template for relation {0:?}")]
    UnknownTemplate(String),

    #[error("invalid question target: {0}")]
    InvalidQuestionTarget(String),

    #[error("question does not match any template frame: {0:?}")]
    QuestionParse(String),

    #[error("image has no objects")]
    EmptyImage,

    #[error("infeasible world config: {0}")]
    InfeasibleConfig(String),

    #[error("unsupported file version {got} (expected {expected})")]
    UnsupportedVersion { expected: u32, got: u32 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed world file: {0}")]
    WorldFile(String),

    #[error("unknown policy {0:?}; valid names: ours, all-conf, all-exp, random")]
    UnknownPolicy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
