//! Embedding providers mapping messages and words to unit vectors.
//!
//! The reference backend is signed feature hashing over content tokens:
//! every token contributes `probes` signed unit entries, the entries are
//! summed over the message, and the sum is L2-normalised. For probe `p`
//! the index is `fnv1a64("{p}:" + token) mod D` and the sign is the top bit
//! of `fnv1a64("{p}#" + token)`. Text without content tokens maps to the
//! basis vector `e_1` with the `degenerate` flag set.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Unit-norm vector on the hypersphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalise `values`; `None` when the vector is zero or not finite.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Some(Self(values))
    }

    /// Standard basis vector `e_{axis+1}`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: EmbeddingVector,
    /// Set when the input had no content tokens and `vector` is the
    /// fallback basis vector.
    pub degenerate: bool,
}

impl Embedding {
    fn fallback(dim: usize) -> Self {
        Self { vector: EmbeddingVector::basis(dim, 0), degenerate: true }
    }
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// Computed as `2·atan2(|a−b|, |a+b|)`, which is exactly zero for equal
/// vectors and exactly π for antipodal ones. Agrees with `acos` of the
/// clamped dot product away from the endpoints.
pub fn angular_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(angle(a.as_slice(), b.as_slice()))
}

pub(crate) fn angle(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

pub trait Embedder: Send + Sync {
    /// Stable identifier, used as the cache key prefix.
    fn backend_id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding>;

    fn embed_many(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ReferenceHash,
    ExternalService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub backend: Backend,
    pub dimension: usize,
    /// Signed hash probes per token (reference backend only).
    pub probes: usize,
    pub service_endpoint: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            backend: Backend::ReferenceHash,
            dimension: 64,
            probes: 4,
            service_endpoint: None,
            cache_path: None,
            timeout_secs: 10,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 8 {
            return Err(Error::InvalidConfig(format!("dimension {} < 8", self.dimension)));
        }
        match self.backend {
            Backend::ReferenceHash if self.probes == 0 => {
                Err(Error::InvalidConfig("probes must be positive".into()))
            }
            Backend::ExternalService if self.service_endpoint.is_none() => {
                Err(Error::InvalidConfig("external-service backend requires service_endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        Ok(match self.backend {
            Backend::ReferenceHash => Arc::new(HashEmbedder::new(self.dimension, self.probes)?),
            Backend::ExternalService => Arc::new(ServiceEmbedder::new(self)?),
        })
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    probes: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize, probes: usize) -> Result<Self> {
        if dim < 8 || probes == 0 {
            return Err(Error::InvalidConfig(format!("dim={dim}, probes={probes}")));
        }
        Ok(Self { dim, probes })
    }

    /// Un-normalised contribution of a single token.
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.accumulate(token, &mut v);
        v
    }

    fn accumulate(&self, token: &str, acc: &mut [f64]) {
        for p in 0..self.probes {
            let idx = fnv1a64(format!("{p}:{token}").as_bytes()) % self.dim as u64;
            let sign = if fnv1a64(format!("{p}#{token}").as_bytes()) >> 63 == 1 { -1.0 } else { 1.0 };
            acc[idx as usize] += sign;
        }
    }
}

impl Embedder for HashEmbedder {
    fn backend_id(&self) -> String {
        format!("reference-hash/d{}/p{}", self.dim, self.probes)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let tokens = tokenize(text);
        let mut acc = vec![0.0; self.dim];
        for tok in tokens.content_tokens() {
            self.accumulate(tok, &mut acc);
        }
        Ok(match EmbeddingVector::normalized(acc) {
            Some(vector) => Embedding { vector, degenerate: false },
            None => Embedding::fallback(self.dim),
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    backend: String,
    text: String,
    vector: Vec<f64>,
}

/// Append-only JSONL cache keyed by `(backend-id, text)`.
#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    entries: Mutex<HashMap<(String, String), Vec<f64>>>,
}

impl EmbeddingCache {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                // a torn final line from a crash is skipped
                if let Ok(rec) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.insert((rec.backend, rec.text), rec.vector);
                }
            }
        }
        Ok(Self { path, entries: Mutex::new(entries) })
    }

    pub fn get(&self, backend: &str, text: &str) -> Option<Vec<f64>> {
        let entries = self.entries.lock().unwrap();
        entries.get(&(backend.to_string(), text.to_string())).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, backend: &str, text: &str, vector: &[f64]) -> Result<()> {
        let mut entries = self.entries.lock().unwrap();
        let key = (backend.to_string(), text.to_string());
        if entries.contains_key(&key) {
            return Ok(());
        }
        let rec = CacheRecord { backend: key.0.clone(), text: key.1.clone(), vector: vector.to_vec() };
        let mut line = serde_json::to_string(&rec).map_err(|e| Error::json("cache record", e))?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        entries.insert(key, rec.vector);
        Ok(())
    }
}

/// Client for an external embedding service speaking
/// `POST /embed {"texts": [...]} -> {"vectors": [[...]], "dim": n}`.
pub struct ServiceEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
    cache: Option<EmbeddingCache>,
}

impl ServiceEmbedder {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self> {
        let endpoint = cfg
            .service_endpoint
            .clone()
            .ok_or_else(|| Error::InvalidConfig("missing service_endpoint".into()))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        let cache = cfg.cache_path.as_ref().map(EmbeddingCache::open).transpose()?;
        Ok(Self { endpoint: endpoint.trim_end_matches('/').to_string(), dim: cfg.dimension, agent, cache })
    }

    pub fn cache(&self) -> Option<&EmbeddingCache> {
        self.cache.as_ref()
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embed", self.endpoint);
        let unavailable = |e: ureq::Error| Error::EmbeddingUnavailable(format!("{url}: {e}"));
        let resp: EmbedResponse = self
            .agent
            .post(&url)
            .send_json(EmbedRequest { texts })
            .map_err(unavailable)?
            .body_mut()
            .read_json()
            .map_err(unavailable)?;
        if resp.vectors.len() != texts.len() {
            return Err(Error::EmbeddingUnavailable(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        if resp.dim != self.dim || resp.vectors.iter().any(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch { left: self.dim, right: resp.dim });
        }
        Ok(resp.vectors)
    }
}

impl Embedder for ServiceEmbedder {
    fn backend_id(&self) -> String {
        format!("external-service/{}", self.endpoint)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        Ok(self.embed_many(&[text])?.remove(0))
    }

    fn embed_many(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        let id = self.backend_id();
        let mut out: Vec<Option<Embedding>> = vec![None; texts.len()];
        let mut missing = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            if tokenize(text).content_tokens().next().is_none() {
                out[i] = Some(Embedding::fallback(self.dim));
            } else if let Some(v) = self.cache.as_ref().and_then(|c| c.get(&id, text)) {
                out[i] = Some(to_embedding(v, self.dim));
            } else {
                missing.push(i);
            }
        }
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let vectors = self.request(&batch)?;
            for (&i, v) in missing.iter().zip(vectors) {
                if let Some(cache) = &self.cache {
                    cache.insert(&id, texts[i], &v)?;
                }
                out[i] = Some(to_embedding(v, self.dim));
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}

fn to_embedding(v: Vec<f64>, dim: usize) -> Embedding {
    match EmbeddingVector::normalized(v) {
        Some(vector) => Embedding { vector, degenerate: false },
        None => Embedding::fallback(dim),
    }
}
