//! Explainable feedback for short motivational messages.
//!
//! Messages are embedded, scored for quality (a small classifier) and
//! diversity (spanning-tree growth over a per-condition corpus), and the
//! scores are explained with token attributions, edit contrasts, and
//! knowledge-graph word suggestions.

pub mod condition;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod explain;
pub mod feedback;
pub mod kg;
pub mod metrics;
pub mod mst;
pub mod payload;
pub mod scoring;
pub mod text;

pub use condition::{Condition, FeedbackFlags};
pub use config::Config;
pub use corpus::{CorpusSnapshot, CorpusStore, IdeationRecord, PromptSet};
pub use embedding::{angular_distance, Embedder, EmbedderConfig, Embedding, EmbeddingVector, HashEmbedder};
pub use error::{Error, Result};
pub use explain::{
    attribute, attribute_top, contrast, contrast_texts, suggest, AttributionSet, Contrast, ScoreFunction, ScoreKind,
    ScoreVector, SuggestConfig, SuggestContext, Suggestion,
};
pub use feedback::{FeedbackEngine, FeedbackResponse, Submission};
pub use kg::{KnowledgeEdge, KnowledgeGraph, KnowledgeSource, RelationFilter, RemoteGraph};
pub use metrics::{bootstrap, evaluate, Metric, MetricReport};
pub use payload::ExplanationPayload;
pub use scoring::{train_quality, QualityModel, ScorePair, Scorer, TrainParams, TrainingExample};
