//! Term-relation graph: TSV snapshots, relation filtering, live lookups.
//!
//! Snapshot format, one edge per line:
//! `relation<TAB>start_term<TAB>end_term<TAB>weight`. Lines starting with
//! `#` are comments. The live client records each fetched term as a
//! `#fetched<TAB>term` comment so reruns know which terms are complete.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEdge {
    pub relation: String,
    pub start_term: String,
    pub end_term: String,
    pub weight: f64,
}

impl KnowledgeEdge {
    fn parse(line: &str) -> Option<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [relation, start, end, weight] = fields.as_slice() else {
            return None;
        };
        let weight: f64 = weight.trim().parse().ok()?;
        let (relation, start, end) = (relation.trim(), start.trim(), end.trim());
        if relation.is_empty() || start.is_empty() || end.is_empty() || !weight.is_finite() || weight < 0.0 {
            return None;
        }
        Some(Self {
            relation: relation.to_string(),
            start_term: start.to_lowercase(),
            end_term: end.to_lowercase(),
            weight,
        })
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.relation, self.start_term, self.end_term, self.weight)
    }
}

/// Relations excluded from related-word search by default.
pub const DEFAULT_EXCLUDED: [&str; 9] = [
    "Synonym",
    "Antonym",
    "DerivedFrom",
    "SymbolOf",
    "DefinedAs",
    "MannerOf",
    "EtymologicallyRelatedTo",
    "EtymologicallyDerivedFrom",
    "ExternalURL",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationFilter {
    pub excluded: BTreeSet<String>,
}

impl Default for RelationFilter {
    fn default() -> Self {
        Self { excluded: DEFAULT_EXCLUDED.iter().map(|s| s.to_string()).collect() }
    }
}

impl RelationFilter {
    pub fn none() -> Self {
        Self { excluded: BTreeSet::new() }
    }

    pub fn allows(&self, relation: &str) -> bool {
        !self.excluded.contains(relation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedTerm {
    pub term: String,
    pub relation: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub edges: usize,
    pub malformed: usize,
    pub comments: usize,
}

/// Immutable, sorted edge set with a per-term adjacency index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    edges: Vec<KnowledgeEdge>,
    adjacency: BTreeMap<String, Vec<usize>>,
}

fn edge_order(a: &KnowledgeEdge, b: &KnowledgeEdge) -> std::cmp::Ordering {
    (&a.start_term, &a.relation, &a.end_term)
        .cmp(&(&b.start_term, &b.relation, &b.end_term))
        .then(a.weight.total_cmp(&b.weight))
}

impl KnowledgeGraph {
    pub fn from_edges(mut edges: Vec<KnowledgeEdge>) -> Self {
        edges.sort_by(edge_order);
        edges.dedup();
        let mut adjacency: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            adjacency.entry(e.start_term.clone()).or_default().push(i);
            if e.end_term != e.start_term {
                adjacency.entry(e.end_term.clone()).or_default().push(i);
            }
        }
        Self { edges, adjacency }
    }

    pub fn parse_tsv(text: &str) -> Result<(Self, IngestStats)> {
        let mut stats = IngestStats::default();
        let mut edges = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            if line.starts_with('#') {
                stats.comments += 1;
                continue;
            }
            match KnowledgeEdge::parse(line) {
                Some(e) => edges.push(e),
                None => stats.malformed += 1,
            }
        }
        if edges.is_empty() && stats.malformed > 0 {
            return Err(Error::AllLinesMalformed(stats.malformed));
        }
        let graph = Self::from_edges(edges);
        stats.edges = graph.edges.len();
        Ok((graph, stats))
    }

    pub fn ingest(path: &Path) -> Result<(Self, IngestStats)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    /// Canonical TSV: sorted edges, no comments.
    pub fn export_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&e.to_tsv());
            out.push('\n');
        }
        out
    }

    pub fn edges(&self) -> &[KnowledgeEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.adjacency.contains_key(term)
    }

    /// Neighbours in either direction through allowed relations, one entry
    /// per term (highest weight kept, ties to the lexicographically first
    /// relation), sorted by descending weight then term.
    pub fn related_words(&self, term: &str, filter: &RelationFilter) -> Vec<RelatedTerm> {
        let term = term.to_lowercase();
        let mut best: BTreeMap<&str, (f64, &str)> = BTreeMap::new();
        for &i in self.adjacency.get(&term).map(Vec::as_slice).unwrap_or_default() {
            let e = &self.edges[i];
            if !filter.allows(&e.relation) {
                continue;
            }
            let other = if e.start_term == term { &e.end_term } else { &e.start_term };
            if *other == term {
                continue;
            }
            let slot = best.entry(other.as_str()).or_insert((e.weight, e.relation.as_str()));
            if e.weight > slot.0 || (e.weight == slot.0 && e.relation.as_str() < slot.1) {
                *slot = (e.weight, e.relation.as_str());
            }
        }
        let mut out: Vec<RelatedTerm> = best
            .into_iter()
            .map(|(t, (w, r))| RelatedTerm { term: t.to_string(), relation: r.to_string(), weight: w })
            .collect();
        out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
        out
    }
}

/// Anything that can answer related-word queries.
pub trait KnowledgeSource: Send + Sync {
    fn related(&self, term: &str, filter: &RelationFilter) -> Result<Vec<RelatedTerm>>;
}

impl KnowledgeSource for KnowledgeGraph {
    fn related(&self, term: &str, filter: &RelationFilter) -> Result<Vec<RelatedTerm>> {
        Ok(self.related_words(term, filter))
    }
}

#[derive(Deserialize)]
struct ApiNode {
    label: String,
    #[serde(default)]
    language: Option<String>,
}

#[derive(Deserialize)]
struct ApiRel {
    label: String,
}

#[derive(Deserialize)]
struct ApiEdge {
    rel: ApiRel,
    start: ApiNode,
    end: ApiNode,
    #[serde(default)]
    weight: f64,
}

#[derive(Deserialize)]
struct ApiResponse {
    #[serde(default)]
    edges: Vec<ApiEdge>,
}

/// Default pause between live requests.
pub const DEFAULT_FETCH_DELAY: Duration = Duration::from_millis(1000);

struct RemoteState {
    graph: KnowledgeGraph,
    fetched: HashSet<String>,
    last_request: Option<Instant>,
    requests: usize,
}

/// Live edge lookups against a ConceptNet-style API
/// (`GET {endpoint}/query?node=/c/en/{term}&other=/c/en&limit=N`), persisted
/// to a local TSV snapshot so reruns stay offline.
pub struct RemoteGraph {
    endpoint: String,
    snapshot: PathBuf,
    delay: Duration,
    limit: usize,
    agent: ureq::Agent,
    state: Mutex<RemoteState>,
}

impl RemoteGraph {
    pub fn new(endpoint: impl Into<String>, snapshot: impl Into<PathBuf>, delay: Duration) -> Result<Self> {
        let snapshot = snapshot.into();
        let mut fetched = HashSet::new();
        let mut graph = KnowledgeGraph::default();
        if snapshot.exists() {
            let text = std::fs::read_to_string(&snapshot).map_err(|e| Error::io(&snapshot, e))?;
            fetched = text
                .lines()
                .filter_map(|l| l.strip_prefix("#fetched\t"))
                .map(|t| t.trim().to_lowercase())
                .collect();
            graph = match KnowledgeGraph::parse_tsv(&text) {
                Ok((g, _)) => g,
                Err(Error::AllLinesMalformed(_)) => KnowledgeGraph::default(),
                Err(e) => return Err(e),
            };
        }
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(15))).build().into();
        Ok(Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            snapshot,
            delay,
            limit: 1000,
            agent,
            state: Mutex::new(RemoteState { graph, fetched, last_request: None, requests: 0 }),
        })
    }

    /// Network requests issued so far.
    pub fn requests(&self) -> usize {
        self.state.lock().unwrap().requests
    }

    pub fn graph(&self) -> KnowledgeGraph {
        self.state.lock().unwrap().graph.clone()
    }

    /// Edges touching `term`, fetched once and then served from the snapshot.
    pub fn fetch_remote(&self, term: &str) -> Result<Vec<KnowledgeEdge>> {
        let term = term.to_lowercase();
        let mut state = self.state.lock().unwrap();
        if !state.fetched.contains(&term) {
            if let Some(last) = state.last_request {
                let wait = self.delay.saturating_sub(last.elapsed());
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            state.last_request = Some(Instant::now());
            state.requests += 1;
            let edges = self.request(&term)?;
            let mut block = String::new();
            for e in &edges {
                block.push_str(&e.to_tsv());
                block.push('\n');
            }
            block.push_str(&format!("#fetched\t{term}\n"));
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.snapshot)
                .map_err(|e| Error::io(&self.snapshot, e))?;
            f.write_all(block.as_bytes()).map_err(|e| Error::io(&self.snapshot, e))?;
            let mut all = state.graph.edges().to_vec();
            all.extend(edges);
            state.graph = KnowledgeGraph::from_edges(all);
            state.fetched.insert(term.clone());
        }
        let g = &state.graph;
        Ok(g.adjacency
            .get(&term)
            .map(|ix| ix.iter().map(|&i| g.edges[i].clone()).collect())
            .unwrap_or_default())
    }

    fn request(&self, term: &str) -> Result<Vec<KnowledgeEdge>> {
        let node = format!("/c/en/{}", term.replace(' ', "_"));
        let url = format!("{}/query", self.endpoint);
        let limit = self.limit.to_string();
        let fail = |e: ureq::Error| Error::NetworkFailure(format!("{url}?node={node}: {e}"));
        let resp: ApiResponse = self
            .agent
            .get(&url)
            .query("node", &node)
            .query("other", "/c/en")
            .query("limit", &limit)
            .call()
            .map_err(fail)?
            .body_mut()
            .read_json()
            .map_err(fail)?;
        Ok(resp
            .edges
            .into_iter()
            .filter(|e| {
                e.start.language.as_deref().unwrap_or("en") == "en" && e.end.language.as_deref().unwrap_or("en") == "en"
            })
            .filter_map(|e| {
                let line = format!("{}\t{}\t{}\t{}", e.rel.label, e.start.label, e.end.label, e.weight.max(0.0));
                KnowledgeEdge::parse(&line)
            })
            .collect())
    }
}

impl KnowledgeSource for RemoteGraph {
    fn related(&self, term: &str, filter: &RelationFilter) -> Result<Vec<RelatedTerm>> {
        match self.fetch_remote(term) {
            Ok(_) => {}
            Err(Error::NetworkFailure(msg)) => {
                let state = self.state.lock().unwrap();
                if !state.graph.contains_term(&term.to_lowercase()) {
                    return Err(Error::KnowledgeGraphUnavailable(msg));
                }
            }
            Err(e) => return Err(e),
        }
        Ok(self.state.lock().unwrap().graph.related_words(term, filter))
    }
}
