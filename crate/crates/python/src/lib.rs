//! Python bindings. Structured results are returned as plain Python
//! objects (dicts and lists) decoded from the engine's JSON forms.

use std::path::PathBuf;
use std::sync::Arc;

use ideafeed_core::condition::Condition;
use ideafeed_core::corpus::PromptSet;
use ideafeed_core::embedding::{Embedder, EmbeddingVector, HashEmbedder};
use ideafeed_core::explain::{attribute_top, contrast_texts, suggest, SuggestContext};
use ideafeed_core::feedback::{FeedbackEngine, Submission};
use ideafeed_core::kg::{KnowledgeGraph, KnowledgeSource, RelationFilter};
use ideafeed_core::metrics::{self, Metric};
use ideafeed_core::scoring::{load_training_jsonl, train_quality};
use ideafeed_core::{text, Config, CorpusStore, Error, QualityModel, ScoreKind, Scorer};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(ideafeed, IdeafeedError, PyException);
create_exception!(ideafeed, DependencyError, IdeafeedError);

fn err(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.code());
    if e.is_dependency() {
        DependencyError::new_err(msg)
    } else {
        IdeafeedError::new_err(msg)
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| IdeafeedError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn vectors(points: Vec<Vec<f64>>) -> PyResult<Vec<EmbeddingVector>> {
    points
        .into_iter()
        .map(|p| EmbeddingVector::normalized(p).ok_or_else(|| IdeafeedError::new_err("zero or non-finite vector")))
        .collect()
}

/// Signed feature-hashing sentence embedder.
#[pyclass(module = "ideafeed", name = "HashEmbedder", frozen)]
struct PyHashEmbedder {
    inner: HashEmbedder,
}

#[pymethods]
impl PyHashEmbedder {
    #[new]
    #[pyo3(signature = (dim = 64, probes = 4))]
    fn new(dim: usize, probes: usize) -> PyResult<Self> {
        Ok(Self { inner: HashEmbedder::new(dim, probes).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Unit-norm embedding of `text`.
    fn embed(&self, text: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.embed(text).map_err(err)?.vector.as_slice().to_vec())
    }
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    text::tokenize(text).tokens
}

#[pyfunction]
fn angular_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let v = vectors(vec![a, b])?;
    ideafeed_core::angular_distance(&v[0], &v[1]).map_err(err)
}

/// Evaluate a corpus metric, optionally with a seeded bootstrap.
#[pyfunction]
#[pyo3(signature = (metric, points, prior = None, n_samples = 0, seed = 7))]
fn evaluate_metric(
    py: Python<'_>,
    metric: &str,
    points: Vec<Vec<f64>>,
    prior: Option<Vec<Vec<f64>>>,
    n_samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let metric: Metric = metric.parse().map_err(err)?;
    let points = vectors(points)?;
    let prior = prior.map(vectors).transpose()?;
    let report = metrics::bootstrap(metric, &points, prior.as_deref(), n_samples, None, seed).map_err(err)?;
    to_py(py, &report)
}

/// Train the quality model on a JSONL file and write it to `out`.
#[pyfunction]
#[pyo3(signature = (data, out, seed = 7, folds = 5, dim = 64))]
fn train(py: Python<'_>, data: PathBuf, out: PathBuf, seed: u64, folds: usize, dim: usize) -> PyResult<Py<PyAny>> {
    let mut params = Config::default().model.train_params(seed);
    params.folds = folds;
    let embedder = HashEmbedder::new(dim, 4).map_err(err)?;
    let examples = load_training_jsonl(&data, params.threshold).map_err(err)?;
    let (model, report) = py.detach(|| train_quality(&examples, &embedder, &params)).map_err(err)?;
    model.save(&out).map_err(err)?;
    to_py(py, &report)
}

/// Relation graph loaded from a TSV snapshot.
#[pyclass(module = "ideafeed", frozen)]
struct Graph {
    inner: KnowledgeGraph,
}

#[pymethods]
impl Graph {
    #[staticmethod]
    fn from_tsv(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: KnowledgeGraph::ingest(&path).map_err(err)?.0 })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Related terms as `(term, relation, weight)`, default relation filter.
    #[pyo3(signature = (term, all_relations = false))]
    fn related(&self, term: &str, all_relations: bool) -> Vec<(String, String, f64)> {
        let filter = if all_relations { RelationFilter::none() } else { RelationFilter::default() };
        self.inner
            .related_words(term, &filter)
            .into_iter()
            .map(|r| (r.term, r.relation, r.weight))
            .collect()
    }
}

/// Everything loaded from one config file: scoring, explanations and the
/// session loop.
#[pyclass(module = "ideafeed", frozen)]
struct Engine {
    cfg: Config,
    engine: FeedbackEngine,
    kg: Arc<dyn KnowledgeSource>,
}

impl Engine {
    fn scorer(&self, condition: &str) -> PyResult<Scorer> {
        let c: Condition = condition.parse().map_err(err)?;
        self.engine.scorer(c).map_err(err)
    }
}

#[pymethods]
impl Engine {
    /// Load model, knowledge graph, prompts and an in-memory corpus store
    /// initialised from the configured seed messages.
    #[new]
    fn new(config: PathBuf) -> PyResult<Self> {
        let mut cfg = Config::load(&config).map_err(err)?;
        cfg.paths.corpus_dir = None;
        let need = |p: &Option<PathBuf>, key: &str| {
            p.clone().ok_or_else(|| err(Error::InvalidConfig(format!("paths.{key} is not set"))))
        };
        let embedder = cfg.embedder.build().map_err(err)?;
        let model = Arc::new(QualityModel::load(&need(&cfg.paths.model, "model")?).map_err(err)?);
        let kg: Arc<dyn KnowledgeSource> =
            Arc::new(KnowledgeGraph::ingest(&need(&cfg.paths.kg, "kg")?).map_err(err)?.0);
        let seeds = ideafeed_core::corpus::read_lines(&need(&cfg.paths.seeds, "seeds")?).map_err(err)?;
        let store = CorpusStore::in_memory(embedder);
        for c in Condition::ALL {
            store.init_corpus(c, &seeds, cfg.service.seed_count, None).map_err(err)?;
        }
        let prompts = PromptSet::from_file(&need(&cfg.paths.prompts, "prompts")?).map_err(err)?;
        let engine = FeedbackEngine::new(
            model,
            kg.clone(),
            Arc::new(store),
            Arc::new(prompts),
            cfg.explain.clone(),
            cfg.seed,
        )
        .map_err(err)?;
        Ok(Self { cfg, engine, kg })
    }

    #[pyo3(signature = (text, condition = "SAXC"))]
    fn score(&self, py: Python<'_>, text: &str, condition: &str) -> PyResult<Py<PyAny>> {
        let s = self.scorer(condition)?.score(text).map_err(err)?;
        to_py(py, &s)
    }

    /// Word attributions for one score.
    #[pyo3(signature = (text, score = "diversity", condition = "SAXC"))]
    fn explain(&self, py: Python<'_>, text: &str, score: &str, condition: &str) -> PyResult<Py<PyAny>> {
        let kind: ScoreKind = score.parse().map_err(err)?;
        let scorer = self.scorer(condition)?;
        let a = attribute_top(text, &scorer, kind, self.cfg.explain.highlight_k).map_err(err)?;
        to_py(py, &a)
    }

    /// Calibrated edit attributions from `earlier` to `later`.
    #[pyo3(signature = (earlier, later, score = "diversity", condition = "SAXC"))]
    fn contrast(&self, py: Python<'_>, earlier: &str, later: &str, score: &str, condition: &str) -> PyResult<Py<PyAny>> {
        let kind: ScoreKind = score.parse().map_err(err)?;
        let scorer = self.scorer(condition)?;
        let c = contrast_texts(earlier, later, 1, 2, &scorer, kind).map_err(err)?;
        to_py(py, &c)
    }

    #[pyo3(signature = (text, score = "diversity", condition = "SAXC"))]
    fn suggest(&self, py: Python<'_>, text: &str, score: &str, condition: &str) -> PyResult<Py<PyAny>> {
        let kind: ScoreKind = score.parse().map_err(err)?;
        let scorer = self.scorer(condition)?;
        let a = attribute_top(text, &scorer, kind, self.cfg.explain.highlight_k).map_err(err)?;
        let sc = self.cfg.explain.suggest_config();
        let delta = sc
            .delta_corpus
            .unwrap_or_else(|| scorer.corpus.pairwise_quantile(self.cfg.explain.delta_corpus_quantile));
        let ctx = SuggestContext::new(scorer.embedder.as_ref(), scorer.corpus.embeddings(), delta, &sc.anchors)
            .map_err(err)?;
        let found = suggest(text, &a, &scorer, self.kg.as_ref(), &ctx, &sc).map_err(err)?;
        to_py(py, &found)
    }

    fn create_session(&self, py: Python<'_>, condition: &str) -> PyResult<Py<PyAny>> {
        let info = self.engine.create_session(condition).map_err(err)?;
        to_py(py, &info)
    }

    fn submit(&self, py: Python<'_>, session_id: &str, prompt_id: usize, text: String, iteration: u32) -> PyResult<Py<PyAny>> {
        let sub = Submission { prompt_id, text, iteration };
        let resp = self.engine.submit(session_id, &sub).map_err(err)?;
        to_py(py, &resp)
    }

    #[pyo3(signature = (session_id, record_id, score = "diversity", compare = None))]
    fn feedback(
        &self,
        py: Python<'_>,
        session_id: &str,
        record_id: &str,
        score: &str,
        compare: Option<u32>,
    ) -> PyResult<Py<PyAny>> {
        let kind: ScoreKind = score.parse().map_err(err)?;
        let resp = self.engine.feedback(session_id, record_id, kind, compare).map_err(err)?;
        to_py(py, &resp)
    }

    fn health(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.engine.health())
    }
}

#[pymodule]
fn ideafeed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IdeafeedError", m.py().get_type::<IdeafeedError>())?;
    m.add("DependencyError", m.py().get_type::<DependencyError>())?;
    m.add_class::<PyHashEmbedder>()?;
    m.add_class::<Graph>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(angular_distance, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_metric, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
