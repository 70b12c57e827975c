use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("embedding service unavailable: {0}")]
    EmbeddingUnavailable(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("corpus needs at least 2 prior ideations, has {0}")]
    EmptyCorpus(usize),
    #[error("model expects dimension {model}, embedder produces {embedder}")]
    ModelMismatch { model: usize, embedder: usize },

    #[error("text has no content tokens")]
    NoContentTokens,
    #[error("records are not iterations of the same ideation")]
    LineageMismatch,

    #[error("knowledge graph unavailable: {0}")]
    KnowledgeGraphUnavailable(String),
    #[error("network failure: {0}")]
    NetworkFailure(String),
    #[error("all {0} data lines are malformed")]
    AllLinesMalformed(usize),

    #[error("metric needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point set is empty")]
    EmptySet,

    #[error("seed file has {available} messages, {requested} requested")]
    TooFewSeeds { requested: usize, available: usize },
    #[error("record condition {record} does not match corpus {corpus}")]
    ConditionMismatch { record: String, corpus: String },
    #[error("all prompts have been drawn in this session")]
    PromptsExhausted,
    #[error("unknown feedback condition {0:?}")]
    InvalidCondition(String),
    #[error("expected iteration {expected}, got {got}")]
    IterationOutOfOrder { expected: u32, got: u32 },
    #[error("text is {0} characters, limit is 2000")]
    TextTooLong(usize),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("comparison unavailable: {0}")]
    CompareUnavailable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmbeddingUnavailable(_) => "embedding_unavailable",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InsufficientData(_) => "insufficient_data",
            Error::SingleClass => "single_class",
            Error::EmptyCorpus(_) => "empty_corpus",
            Error::ModelMismatch { .. } => "model_mismatch",
            Error::NoContentTokens => "no_content_tokens",
            Error::LineageMismatch => "lineage_mismatch",
            Error::KnowledgeGraphUnavailable(_) => "knowledge_graph_unavailable",
            Error::NetworkFailure(_) => "network_failure",
            Error::AllLinesMalformed(_) => "all_lines_malformed",
            Error::TooFewPoints(_) => "too_few_points",
            Error::EmptySet => "empty_set",
            Error::TooFewSeeds { .. } => "too_few_seeds",
            Error::ConditionMismatch { .. } => "condition_mismatch",
            Error::PromptsExhausted => "prompts_exhausted",
            Error::InvalidCondition(_) => "invalid_condition",
            Error::IterationOutOfOrder { .. } => "iteration_out_of_order",
            Error::TextTooLong(_) => "text_too_long",
            Error::NotFound(_) => "not_found",
            Error::CompareUnavailable(_) => "compare_unavailable",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    /// Whether the failure comes from an external dependency (embedding
    /// service, knowledge-graph endpoint) rather than from the input data.
    pub fn is_dependency(&self) -> bool {
        matches!(
            self,
            Error::EmbeddingUnavailable(_) | Error::KnowledgeGraphUnavailable(_) | Error::NetworkFailure(_)
        )
    }
}
