//! Quality prediction and corpus-relative diversity scoring.
//!
//! The quality score is `100 × σ(forward([z ‖ len]))` from a two-layer
//! network over the message embedding `z` and the normalised word count.
//! The diversity score is the increase of the corpus MST edge-weight sum
//! caused by adding the message, expressed as a percentage of π.

use std::f64::consts::PI;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusSnapshot;
use crate::embedding::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::explain::{ScoreFunction, ScoreVector};
use crate::mst::mst_with_extra_point;
use crate::text::tokenize;

pub const DEFAULT_THRESHOLD: f64 = 1.17;
/// Word count at which the length feature saturates at 1.
pub const LENGTH_SCALE: f64 = 50.0;

pub fn normalized_length(text: &str) -> f64 {
    (tokenize(text).len() as f64 / LENGTH_SCALE).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    pub rating: f64,
    pub label: bool,
}

impl TrainingExample {
    pub fn new(text: impl Into<String>, rating: f64, threshold: f64) -> Self {
        Self { text: text.into(), rating, label: rating > threshold }
    }
}

#[derive(Deserialize)]
struct RatedLine {
    text: String,
    rating: f64,
}

/// Read `{"text": ..., "rating": ...}` lines, skipping blank lines.
pub fn load_training_jsonl(path: &Path, threshold: f64) -> Result<Vec<TrainingExample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RatedLine = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), n + 1), e))?;
        out.push(TrainingExample::new(rec.text, rec.rating, threshold));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub folds: usize,
    pub seed: u64,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { folds: 5, seed: 0, hidden: 16, epochs: 400, learning_rate: 0.5, threshold: DEFAULT_THRESHOLD }
    }
}

/// Two-layer network: `tanh` hidden layer, sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    /// Embedding dimension; the input layer has `dim + 1` features.
    pub dim: usize,
    pub hidden: usize,
    pub activation: String,
    /// `hidden` rows of `dim + 1` weights.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub seed: u64,
    pub threshold: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub embedder: String,
    pub train_hash: String,
    pub fold_aucs: Vec<f64>,
}

impl QualityModel {
    /// All-zero weights; predicts exactly 0.5 everywhere.
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            activation: "tanh".into(),
            w1: vec![vec![0.0; dim + 1]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            epochs: 0,
            learning_rate: 0.0,
            embedder: String::new(),
            train_hash: String::new(),
            fold_aucs: Vec::new(),
        }
    }

    fn init(dim: usize, params: &TrainParams, rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::zeros(dim, params.hidden);
        let a1 = (6.0 / (dim + 1 + params.hidden) as f64).sqrt();
        for row in &mut m.w1 {
            for w in row.iter_mut() {
                *w = rng.gen_range(-a1..a1);
            }
        }
        let a2 = (6.0 / (params.hidden + 1) as f64).sqrt();
        for w in &mut m.w2 {
            *w = rng.gen_range(-a2..a2);
        }
        m.seed = params.seed;
        m.threshold = params.threshold;
        m.epochs = params.epochs;
        m.learning_rate = params.learning_rate;
        m
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect()
    }

    /// Probability of the high-quality class for a feature vector.
    pub fn forward(&self, features: &[f64]) -> f64 {
        let h = self.hidden_layer(features);
        sigmoid(self.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + self.b2)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::json("model", e))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let m: Self = serde_json::from_slice(bytes).map_err(|e| Error::json("model", e))?;
        if m.w1.len() != m.hidden || m.b1.len() != m.hidden || m.w2.len() != m.hidden {
            return Err(Error::InvalidConfig("model layer sizes disagree with `hidden`".into()));
        }
        if m.w1.iter().any(|r| r.len() != m.dim + 1) {
            return Err(Error::InvalidConfig("model input width disagrees with `dim`".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the serialised model, hex encoded.
    pub fn content_hash(&self) -> String {
        hex_digest(&self.to_json().unwrap_or_default())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn features(embedder: &dyn Embedder, text: &str) -> Result<(Vec<f64>, bool)> {
    let e = embedder.embed(text)?;
    let mut x = e.vector.as_slice().to_vec();
    x.push(normalized_length(text));
    Ok((x, e.degenerate))
}

/// Area under the ROC curve by pairwise comparison; ties count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += match p.partial_cmp(n) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    /// Examples kept after majority-class downsampling.
    pub used: usize,
    pub dropped: usize,
}

fn fit(xs: &[Vec<f64>], ys: &[f64], dim: usize, params: &TrainParams, rng: &mut ChaCha8Rng) -> QualityModel {
    let mut m = QualityModel::init(dim, params, rng);
    let n = xs.len() as f64;
    let width = dim + 1;
    let mut g1 = vec![vec![0.0; width]; params.hidden];
    let mut gb1 = vec![0.0; params.hidden];
    let mut g2 = vec![0.0; params.hidden];
    for _ in 0..params.epochs {
        g1.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
        gb1.iter_mut().for_each(|v| *v = 0.0);
        g2.iter_mut().for_each(|v| *v = 0.0);
        let mut gb2 = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let h = m.hidden_layer(x);
            let out = sigmoid(m.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + m.b2);
            let err = out - y;
            gb2 += err;
            for j in 0..params.hidden {
                g2[j] += err * h[j];
                let dh = err * m.w2[j] * (1.0 - h[j] * h[j]);
                gb1[j] += dh;
                for (g, v) in g1[j].iter_mut().zip(x) {
                    *g += dh * v;
                }
            }
        }
        let step = params.learning_rate / n;
        for j in 0..params.hidden {
            m.w2[j] -= step * g2[j];
            m.b1[j] -= step * gb1[j];
            for (w, g) in m.w1[j].iter_mut().zip(&g1[j]) {
                *w -= step * g;
            }
        }
        m.b2 -= step * gb2;
    }
    m
}

/// Train on balanced data and report stratified k-fold AUCs. The returned
/// model is fit on all balanced examples; a fixed seed gives identical bytes.
pub fn train_quality(
    examples: &[TrainingExample],
    embedder: &dyn Embedder,
    params: &TrainParams,
) -> Result<(QualityModel, TrainingReport)> {
    if examples.len() < 20 {
        return Err(Error::InsufficientData(format!("{} examples, need at least 20", examples.len())));
    }
    if params.folds < 2 {
        return Err(Error::InsufficientData(format!("folds = {}, need at least 2", params.folds)));
    }
    let mut pos: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].label).collect();
    let mut neg: Vec<usize> = (0..examples.len()).filter(|&i| !examples[i].label).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let keep = pos.len().min(neg.len());
    if keep < params.folds {
        return Err(Error::InsufficientData(format!(
            "minority class has {keep} examples, fewer than {} folds",
            params.folds
        )));
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.truncate(keep);
    neg.truncate(keep);

    let dim = embedder.dim();
    let mut xs = Vec::with_capacity(2 * keep);
    let mut ys = Vec::with_capacity(2 * keep);
    let mut fold_of = Vec::with_capacity(2 * keep);
    for class in [&pos, &neg] {
        for (k, &i) in class.iter().enumerate() {
            xs.push(features(embedder, &examples[i].text)?.0);
            ys.push(if examples[i].label { 1.0 } else { 0.0 });
            fold_of.push(k % params.folds);
        }
    }

    let mut fold_aucs = Vec::with_capacity(params.folds);
    for fold in 0..params.folds {
        let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
        for i in 0..xs.len() {
            if fold_of[i] == fold {
                vx.push(&xs[i]);
                vy.push(ys[i] > 0.5);
            } else {
                tx.push(xs[i].clone());
                ty.push(ys[i]);
            }
        }
        let m = fit(&tx, &ty, dim, params, &mut rng);
        let scores: Vec<f64> = vx.iter().map(|x| m.forward(x)).collect();
        fold_aucs.push(auc(&scores, &vy).expect("stratified folds hold both classes"));
    }

    let mut model = fit(&xs, &ys, dim, params, &mut rng);
    model.embedder = embedder.backend_id();
    model.train_hash = training_hash(examples, params.threshold);
    model.fold_aucs = fold_aucs.clone();
    let mean_auc = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
    let report = TrainingReport { fold_aucs, mean_auc, used: 2 * keep, dropped: examples.len() - 2 * keep };
    Ok((model, report))
}

fn training_hash(examples: &[TrainingExample], threshold: f64) -> String {
    let mut h = Sha256::new();
    h.update(format!("threshold={threshold}\n"));
    for ex in examples {
        h.update(serde_json::to_string(ex).unwrap_or_default());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityPrediction {
    pub quality_pct: f64,
    pub degenerate: bool,
}

pub fn predict_quality(model: &QualityModel, embedder: &dyn Embedder, text: &str) -> Result<QualityPrediction> {
    if model.dim != embedder.dim() {
        return Err(Error::ModelMismatch { model: model.dim, embedder: embedder.dim() });
    }
    let (x, degenerate) = features(embedder, text)?;
    Ok(QualityPrediction { quality_pct: 100.0 * model.forward(&x), degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    /// MST-sum increase in radians; may be negative.
    pub diversity_raw: f64,
    pub diversity_pct: f64,
    /// `diversity_pct` clamped to `[0, 100]`.
    pub display_diversity_pct: f64,
}

impl DiversityScore {
    pub fn from_raw(raw: f64) -> Self {
        let pct = 100.0 * raw / PI;
        Self { diversity_raw: raw, diversity_pct: pct, display_diversity_pct: pct.clamp(0.0, 100.0) }
    }
}

pub fn diversity_of_vector(vector: &EmbeddingVector, corpus: &CorpusSnapshot) -> Result<DiversityScore> {
    let points = corpus.embeddings();
    if points.len() < 2 {
        return Err(Error::EmptyCorpus(points.len()));
    }
    if let Some(p) = points.first() {
        if p.dim() != vector.dim() {
            return Err(Error::DimensionMismatch { left: p.dim(), right: vector.dim() });
        }
    }
    let base = corpus.tree();
    let grown = mst_with_extra_point(points, base, vector);
    Ok(DiversityScore::from_raw(grown.total - base.total))
}

pub fn diversity_score(embedder: &dyn Embedder, text: &str, corpus: &CorpusSnapshot) -> Result<DiversityScore> {
    diversity_of_vector(&embedder.embed(text)?.vector, corpus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub quality_pct: f64,
    pub diversity_pct: f64,
    pub diversity_raw: f64,
    pub display_diversity_pct: f64,
    /// The message had no content tokens.
    pub degenerate: bool,
}

impl ScorePair {
    pub fn vector(&self) -> ScoreVector {
        ScoreVector { quality: self.quality_pct, diversity: self.diversity_pct }
    }
}

/// The score function `s(x)` against one model and one corpus snapshot.
#[derive(Clone)]
pub struct Scorer {
    pub embedder: Arc<dyn Embedder>,
    pub model: Arc<QualityModel>,
    pub corpus: Arc<CorpusSnapshot>,
}

impl Scorer {
    pub fn new(embedder: Arc<dyn Embedder>, model: Arc<QualityModel>, corpus: Arc<CorpusSnapshot>) -> Result<Self> {
        if model.dim != embedder.dim() {
            return Err(Error::ModelMismatch { model: model.dim, embedder: embedder.dim() });
        }
        Ok(Self { embedder, model, corpus })
    }

    pub fn score(&self, text: &str) -> Result<ScorePair> {
        let e = self.embedder.embed(text)?;
        let mut x = e.vector.as_slice().to_vec();
        x.push(normalized_length(text));
        let quality_pct = 100.0 * self.model.forward(&x);
        let d = diversity_of_vector(&e.vector, &self.corpus)?;
        Ok(ScorePair {
            quality_pct,
            diversity_pct: d.diversity_pct,
            diversity_raw: d.diversity_raw,
            display_diversity_pct: d.display_diversity_pct,
            degenerate: e.degenerate,
        })
    }
}

impl ScoreFunction for Scorer {
    fn scores(&self, text: &str) -> Result<ScoreVector> {
        Ok(self.score(text)?.vector())
    }
}
