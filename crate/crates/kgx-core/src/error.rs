//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("entity id {id} out of range (|V| = {count})")]
    EntityOutOfRange { id: u32, count: usize },

    #[error("relation id {id} out of range (|R| = {count})")]
    RelationOutOfRange { id: u32, count: usize },

    /// The k-hop neighborhoods of the two query endpoints do not intersect,
    /// i.e. the pair is more than `hops` (= 2k) hops apart.
    #[error("entities {head} and {tail} are disconnected within {hops} hops")]
    DisconnectedPair { head: u32, tail: u32, hops: usize },

    #[error("entity {0} is not part of the subgraph")]
    InvalidSelection(u32),

    #[error("entity {0} is a query endpoint and cannot be removed")]
    ProtectedEntity(u32),

    #[error("no explanation: {0}")]
    NoExplanation(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(
        "search-cost audit violation for fact #{fact}: \
         {evaluations} importance evaluations exceed the bound {bound}"
    )]
    AuditViolation {
        fact: usize,
        evaluations: usize,
        bound: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
