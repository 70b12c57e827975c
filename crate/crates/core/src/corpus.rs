//! Per-condition prior-ideation corpora, prompts and ideation records.
//!
//! On disk a store is a directory holding one append-only JSONL file per
//! condition (`<COND>.jsonl`) and an `index.json` with the seed count and
//! latest version of each condition. The JSONL files are the source of
//! truth; reloading replays them.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::embedding::{angle, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::mst::{mst_of_points, mst_with_extra_point, SpanningTree};
use crate::scoring::ScorePair;

pub const MAX_ITERATIONS: u32 = 3;
pub const DEFAULT_SEED_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub text: String,
    pub embedding: EmbeddingVector,
}

/// Immutable view of one condition's prior ideations at one version.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusSnapshot {
    pub condition: Condition,
    pub version: u64,
    pub ideations: Vec<CorpusEntry>,
    #[serde(skip)]
    embeddings: Vec<EmbeddingVector>,
    #[serde(skip)]
    tree: Option<SpanningTree>,
}

impl PartialEq for CorpusSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.condition == other.condition && self.version == other.version && self.ideations == other.ideations
    }
}

impl CorpusSnapshot {
    pub fn new(condition: Condition, version: u64, ideations: Vec<CorpusEntry>) -> Self {
        let embeddings: Vec<EmbeddingVector> = ideations.iter().map(|e| e.embedding.clone()).collect();
        let tree = mst_of_points(&embeddings);
        Self { condition, version, ideations, embeddings, tree: Some(tree) }
    }

    /// Embed `texts` and build a version-1 snapshot with ids `<COND>-seed-NNN`.
    pub fn from_texts<S: AsRef<str>>(condition: Condition, texts: &[S], embedder: &dyn Embedder) -> Result<Self> {
        let refs: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
        let embedded = embedder.embed_many(&refs)?;
        let entries = refs
            .iter()
            .zip(embedded)
            .enumerate()
            .map(|(i, (t, e))| CorpusEntry { id: seed_id(condition, i), text: t.to_string(), embedding: e.vector })
            .collect();
        Ok(Self::new(condition, 1, entries))
    }

    fn appended(&self, entry: CorpusEntry) -> Self {
        let tree = mst_with_extra_point(&self.embeddings, self.tree(), &entry.embedding);
        let mut ideations = self.ideations.clone();
        let mut embeddings = self.embeddings.clone();
        embeddings.push(entry.embedding.clone());
        ideations.push(entry);
        Self { condition: self.condition, version: self.version + 1, ideations, embeddings, tree: Some(tree) }
    }

    pub fn len(&self) -> usize {
        self.ideations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ideations.is_empty()
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    /// Minimum spanning tree of the prior ideations.
    pub fn tree(&self) -> &SpanningTree {
        self.tree.as_ref().expect("snapshot built through a constructor")
    }

    pub fn texts(&self) -> Vec<&str> {
        self.ideations.iter().map(|e| e.text.as_str()).collect()
    }

    /// Linear-interpolated quantile of all pairwise angular distances;
    /// π when there are fewer than two ideations.
    pub fn pairwise_quantile(&self, q: f64) -> f64 {
        let pts = &self.embeddings;
        let mut d = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d.push(angle(pts[i].as_slice(), pts[j].as_slice()));
            }
        }
        quantile(&mut d, q).unwrap_or(std::f64::consts::PI)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::json("snapshot", e))
    }
}

pub(crate) fn quantile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

fn seed_id(condition: Condition, i: usize) -> String {
    format!("{condition}-seed-{:03}", i + 1)
}

/// One submitted iteration of one ideation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeationRecord {
    pub id: String,
    pub session_id: String,
    pub prompt_id: usize,
    pub condition: Condition,
    pub iteration: u32,
    pub text: String,
    pub scores: ScorePair,
    pub parent: Option<String>,
    /// Corpus version the scores were computed against.
    pub corpus_version: u64,
    pub ts: String,
}

/// Line format of the corpus JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub condition: Condition,
    pub iteration: Option<u32>,
    pub parent: Option<String>,
    pub quality_pct: Option<f64>,
    pub diversity_pct: Option<f64>,
    pub ts: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    version: u64,
    seed_count: usize,
    records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct StoreIndex {
    embedder: String,
    conditions: BTreeMap<Condition, IndexEntry>,
}

#[derive(Default)]
struct Slot {
    writer: Mutex<()>,
    current: RwLock<Option<Arc<CorpusSnapshot>>>,
}

/// Corpora for all six conditions. Appends are serialised per condition;
/// readers hold `Arc` snapshots that later appends never touch.
pub struct CorpusStore {
    dir: Option<PathBuf>,
    embedder: Arc<dyn Embedder>,
    slots: BTreeMap<Condition, Slot>,
    index: Mutex<StoreIndex>,
}

fn now_iso() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Seed messages: one per line, blank and `#` lines ignored.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

impl CorpusStore {
    pub fn in_memory(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            dir: None,
            slots: Condition::ALL.into_iter().map(|c| (c, Slot::default())).collect(),
            index: Mutex::new(StoreIndex { embedder: embedder.backend_id(), ..Default::default() }),
            embedder,
        }
    }

    /// Open (or create) a store directory and replay every condition file.
    pub fn open(dir: impl Into<PathBuf>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut store = Self::in_memory(embedder);
        store.dir = Some(dir.clone());
        let index_path = dir.join("index.json");
        if !index_path.exists() {
            store.write_index()?;
            return Ok(store);
        }
        let raw = std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let mut index: StoreIndex = serde_json::from_slice(&raw).map_err(|e| Error::json("index.json", e))?;
        for (cond, entry) in index.conditions.iter_mut() {
            let records = read_records(&dir.join(format!("{cond}.jsonl")))?;
            if records.len() < entry.seed_count {
                return Err(Error::InvalidConfig(format!(
                    "{cond}.jsonl has {} records but index lists {} seeds",
                    records.len(),
                    entry.seed_count
                )));
            }
            let snap = store.replay(*cond, &records, entry.seed_count)?;
            entry.version = snap.version;
            entry.records = records.len();
            *store.slots[cond].current.write().unwrap() = Some(Arc::new(snap));
        }
        *store.index.lock().unwrap() = index;
        store.write_index()?;
        Ok(store)
    }

    fn replay(&self, condition: Condition, records: &[CorpusRecord], seed_count: usize) -> Result<CorpusSnapshot> {
        let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
        let embedded = self.embedder.embed_many(&texts)?;
        let mut entries: Vec<CorpusEntry> = records
            .iter()
            .zip(embedded)
            .map(|(r, e)| CorpusEntry { id: r.id.clone(), text: r.text.clone(), embedding: e.vector })
            .collect();
        let tail = entries.split_off(seed_count);
        let mut snap = CorpusSnapshot::new(condition, 1, entries);
        for entry in tail {
            snap = snap.appended(entry);
        }
        Ok(snap)
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Latest snapshot of a condition, if initialised.
    pub fn snapshot(&self, condition: Condition) -> Option<Arc<CorpusSnapshot>> {
        self.slots[&condition].current.read().unwrap().clone()
    }

    pub fn versions(&self) -> BTreeMap<Condition, u64> {
        Condition::ALL
            .into_iter()
            .filter_map(|c| self.snapshot(c).map(|s| (c, s.version)))
            .collect()
    }

    /// Number of seed ideations a condition was initialised with.
    pub fn seed_count(&self, condition: Condition) -> Option<usize> {
        self.index.lock().unwrap().conditions.get(&condition).map(|e| e.seed_count)
    }

    /// Initialise a condition with `n` seed messages: the first `n`, or a
    /// seeded random choice (kept in file order) when `sample_seed` is set.
    /// Replaces any previous corpus of that condition.
    pub fn init_corpus(
        &self,
        condition: Condition,
        seeds: &[String],
        n: usize,
        sample_seed: Option<u64>,
    ) -> Result<Arc<CorpusSnapshot>> {
        if n == 0 {
            return Err(Error::InvalidConfig("seed count must be positive".into()));
        }
        if seeds.len() < n {
            return Err(Error::TooFewSeeds { requested: n, available: seeds.len() });
        }
        let chosen: Vec<&String> = match sample_seed {
            None => seeds.iter().take(n).collect(),
            Some(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut idx = sample(&mut rng, seeds.len(), n).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| &seeds[i]).collect()
            }
        };
        let slot = &self.slots[&condition];
        let _w = slot.writer.lock().unwrap();
        let snap = CorpusSnapshot::from_texts(condition, &chosen, self.embedder.as_ref())?;
        if let Some(dir) = &self.dir {
            let ts = now_iso();
            let mut body = String::new();
            for e in &snap.ideations {
                let rec = CorpusRecord {
                    id: e.id.clone(),
                    text: e.text.clone(),
                    condition,
                    iteration: None,
                    parent: None,
                    quality_pct: None,
                    diversity_pct: None,
                    ts: ts.clone(),
                };
                body.push_str(&serde_json::to_string(&rec).map_err(|e| Error::json("corpus record", e))?);
                body.push('\n');
            }
            let path = dir.join(format!("{condition}.jsonl"));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        self.index
            .lock()
            .unwrap()
            .conditions
            .insert(condition, IndexEntry { version: 1, seed_count: n, records: n });
        self.write_index()?;
        let snap = Arc::new(snap);
        *slot.current.write().unwrap() = Some(snap.clone());
        Ok(snap)
    }

    pub fn init_from_file(
        &self,
        condition: Condition,
        seed_file: &Path,
        n: usize,
        sample_seed: Option<u64>,
    ) -> Result<Arc<CorpusSnapshot>> {
        self.init_corpus(condition, &read_lines(seed_file)?, n, sample_seed)
    }

    /// Append a final iteration, producing version `v + 1`.
    pub fn append_ideation(&self, condition: Condition, record: &IdeationRecord) -> Result<Arc<CorpusSnapshot>> {
        if record.condition != condition {
            return Err(Error::ConditionMismatch {
                record: record.condition.to_string(),
                corpus: condition.to_string(),
            });
        }
        if record.iteration != MAX_ITERATIONS {
            return Err(Error::IterationOutOfOrder { expected: MAX_ITERATIONS, got: record.iteration });
        }
        let slot = &self.slots[&condition];
        let _w = slot.writer.lock().unwrap();
        let current = self
            .snapshot(condition)
            .ok_or_else(|| Error::NotFound(format!("corpus for condition {condition} is not initialised")))?;
        let embedding = self.embedder.embed(&record.text)?.vector;
        if let Some(dir) = &self.dir {
            let rec = CorpusRecord {
                id: record.id.clone(),
                text: record.text.clone(),
                condition,
                iteration: Some(record.iteration),
                parent: record.parent.clone(),
                quality_pct: Some(record.scores.quality_pct),
                diversity_pct: Some(record.scores.diversity_pct),
                ts: now_iso(),
            };
            let mut line = serde_json::to_string(&rec).map_err(|e| Error::json("corpus record", e))?;
            line.push('\n');
            let path = dir.join(format!("{condition}.jsonl"));
            let mut f = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        let next = Arc::new(current.appended(CorpusEntry {
            id: record.id.clone(),
            text: record.text.clone(),
            embedding,
        }));
        {
            let mut index = self.index.lock().unwrap();
            let entry = index.conditions.entry(condition).or_default();
            entry.version = next.version;
            entry.records = next.len();
        }
        self.write_index()?;
        *slot.current.write().unwrap() = Some(next.clone());
        Ok(next)
    }

    fn write_index(&self) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let bytes = {
            let index = self.index.lock().unwrap();
            serde_json::to_vec_pretty(&*index).map_err(|e| Error::json("index.json", e))?
        };
        let tmp = dir.join("index.json.tmp");
        let path = dir.join("index.json");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Raw JSONL records of a condition (seed records first).
    pub fn records(&self, condition: Condition) -> Result<Vec<CorpusRecord>> {
        match &self.dir {
            Some(dir) => read_records(&dir.join(format!("{condition}.jsonl"))),
            None => Err(Error::NotFound("in-memory store keeps no record files".into())),
        }
    }
}

fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            // torn write at the tail from an interrupted append
            Err(_) if i == last => break,
            Err(e) => return Err(Error::json(format!("{}:{}", path.display(), i + 1), e)),
        }
    }
    Ok(out)
}

/// Prompt phrases shared by all sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub phrases: Vec<String>,
}

impl PromptSet {
    pub fn new(phrases: Vec<String>) -> Self {
        Self { phrases }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(read_lines(path)?))
    }

    pub fn deck(&self, seed: u64) -> PromptDeck {
        let mut order: Vec<usize> = (0..self.phrases.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        PromptDeck { order, drawn: 0 }
    }
}

/// Per-session draw-without-replacement state.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptDeck {
    order: Vec<usize>,
    drawn: usize,
}

impl PromptDeck {
    /// Next prompt id (index into the prompt set).
    pub fn next_prompt(&mut self) -> Result<usize> {
        let id = *self.order.get(self.drawn).ok_or(Error::PromptsExhausted)?;
        self.drawn += 1;
        Ok(id)
    }

    pub fn remaining(&self) -> usize {
        self.order.len() - self.drawn
    }
}
