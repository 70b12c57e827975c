//! Build engine components from a [`Config`].

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use ideafeed_core::condition::Condition;
use ideafeed_core::corpus::{read_lines, CorpusStore, PromptSet};
use ideafeed_core::embedding::Embedder;
use ideafeed_core::kg::{KnowledgeGraph, KnowledgeSource, RemoteGraph};
use ideafeed_core::{Config, Error, FeedbackEngine, QualityModel, Result};

pub fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    path.clone().ok_or_else(|| Error::InvalidConfig(format!("paths.{key} is not set")))
}

pub fn embedder(cfg: &Config) -> Result<Arc<dyn Embedder>> {
    cfg.embedder.build()
}

pub fn load_model(cfg: &Config) -> Result<QualityModel> {
    QualityModel::load(&required(&cfg.paths.model, "model")?)
}

/// The offline snapshot, or a live client that persists into it when an
/// endpoint is configured.
pub fn knowledge(cfg: &Config) -> Result<Arc<dyn KnowledgeSource>> {
    let path = required(&cfg.paths.kg, "kg")?;
    match &cfg.kg.endpoint {
        Some(endpoint) => Ok(Arc::new(RemoteGraph::new(
            endpoint.clone(),
            path,
            Duration::from_millis(cfg.kg.fetch_delay_ms),
        )?)),
        None => Ok(Arc::new(KnowledgeGraph::ingest(&path)?.0)),
    }
}

/// Open the corpus store and initialise any condition that has no corpus
/// yet from the configured seed file.
pub fn open_store(cfg: &Config, embedder: Arc<dyn Embedder>) -> Result<Arc<CorpusStore>> {
    let store = match &cfg.paths.corpus_dir {
        Some(dir) => CorpusStore::open(dir, embedder)?,
        None => CorpusStore::in_memory(embedder),
    };
    let missing: Vec<Condition> = Condition::ALL.into_iter().filter(|c| store.snapshot(*c).is_none()).collect();
    if !missing.is_empty() {
        let seeds = read_lines(&required(&cfg.paths.seeds, "seeds")?)?;
        for c in missing {
            store.init_corpus(c, &seeds, cfg.service.seed_count, None)?;
        }
    }
    Ok(Arc::new(store))
}

pub fn engine(cfg: &Config) -> Result<FeedbackEngine> {
    let embedder = embedder(cfg)?;
    let model = Arc::new(load_model(cfg)?);
    let store = open_store(cfg, embedder)?;
    let prompts = Arc::new(PromptSet::from_file(&required(&cfg.paths.prompts, "prompts")?)?);
    FeedbackEngine::new(model, knowledge(cfg)?, store, prompts, cfg.explain.clone(), cfg.seed)
}
