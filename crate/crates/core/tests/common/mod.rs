#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ideafeed_core::condition::Condition;
use ideafeed_core::corpus::{read_lines, CorpusSnapshot};
use ideafeed_core::embedding::{Embedder, EmbeddingVector, HashEmbedder};
use ideafeed_core::kg::KnowledgeGraph;
use ideafeed_core::{QualityModel, Scorer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn seeds() -> Vec<String> {
    read_lines(&fixture("seeds.txt")).unwrap()
}

pub fn embedder() -> Arc<dyn Embedder> {
    Arc::new(HashEmbedder::new(64, 4).unwrap())
}

pub fn model() -> Arc<QualityModel> {
    Arc::new(QualityModel::load(&fixture("model.json")).unwrap())
}

pub fn corpus(embedder: &dyn Embedder) -> Arc<CorpusSnapshot> {
    Arc::new(CorpusSnapshot::from_texts(Condition::SAXC, &seeds(), embedder).unwrap())
}

pub fn scorer() -> Scorer {
    let e = embedder();
    let c = corpus(e.as_ref());
    Scorer::new(e, model(), c).unwrap()
}

pub fn graph() -> KnowledgeGraph {
    KnowledgeGraph::ingest(&fixture("kg.tsv")).unwrap().0
}

/// Uniform random unit vector (Gaussian coordinates via Box-Muller).
pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        if let Some(u) = EmbeddingVector::normalized(v) {
            return u;
        }
    }
}

/// Test messages: the seed corpus plus variants that reuse words.
pub fn messages() -> Vec<String> {
    let mut out = seeds();
    out.push("Walk walk walk, and then walk some more with your dog.".into());
    out.push("Exercise makes time for your heart, and time makes exercise easy.".into());
    out
}
