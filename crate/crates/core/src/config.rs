//! One TOML file holding every threshold and path. Relative paths are
//! resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbedderConfig;
use crate::error::{Error, Result};
use crate::explain::SuggestConfig;
use crate::kg::{RelationFilter, DEFAULT_EXCLUDED};
use crate::scoring::TrainParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainSettings {
    pub highlight_k: usize,
    /// Fixed corpus-distance threshold; unset means the quantile below.
    pub delta_corpus: Option<f64>,
    pub delta_corpus_quantile: f64,
    pub delta_anchor: f64,
    pub omega: f64,
    pub top_k: usize,
    pub min_related: usize,
    pub anchors: Vec<String>,
    pub excluded_relations: Vec<String>,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        let s = SuggestConfig::default();
        Self {
            highlight_k: 3,
            delta_corpus: None,
            delta_corpus_quantile: 0.75,
            delta_anchor: s.delta_anchor,
            omega: s.omega,
            top_k: s.top_k,
            min_related: s.min_related,
            anchors: s.anchors,
            excluded_relations: DEFAULT_EXCLUDED.iter().map(|r| r.to_string()).collect(),
        }
    }
}

impl ExplainSettings {
    pub fn suggest_config(&self) -> SuggestConfig {
        SuggestConfig {
            delta_corpus: self.delta_corpus,
            delta_anchor: self.delta_anchor,
            omega: self.omega,
            top_k: self.top_k,
            min_related: self.min_related,
            anchors: self.anchors.clone(),
            filter: RelationFilter { excluded: self.excluded_relations.iter().cloned().collect() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub folds: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let p = TrainParams::default();
        Self { hidden: p.hidden, epochs: p.epochs, learning_rate: p.learning_rate, threshold: p.threshold, folds: p.folds }
    }
}

impl ModelSettings {
    pub fn train_params(&self, seed: u64) -> TrainParams {
        TrainParams {
            folds: self.folds,
            seed,
            hidden: self.hidden,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub model: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub kg: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub training: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KgSettings {
    /// Live edge-lookup endpoint; unset means offline snapshot only.
    pub endpoint: Option<String>,
    pub fetch_delay_ms: u64,
}

impl Default for KgSettings {
    fn default() -> Self {
        Self { endpoint: None, fetch_delay_ms: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSettings {
    pub bind: String,
    pub seed_count: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), seed_count: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    pub embedder: EmbedderConfig,
    pub model: ModelSettings,
    pub explain: ExplainSettings,
    pub kg: KgSettings,
    pub paths: Paths,
    pub service: ServiceSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 7,
            embedder: EmbedderConfig::default(),
            model: ModelSettings::default(),
            explain: ExplainSettings::default(),
            kg: KgSettings::default(),
            paths: Paths::default(),
            service: ServiceSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.embedder.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.model,
            &mut paths.corpus_dir,
            &mut paths.kg,
            &mut paths.prompts,
            &mut paths.seeds,
            &mut paths.training,
            &mut self.embedder.cache_path,
        ] {
            fix(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_files() {
        let cfg = Config::from_toml("seed = 3\n[explain]\ndelta_anchor = 1.5\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.explain.delta_anchor, 1.5);
        assert_eq!(cfg.explain.top_k, 3);
        assert_eq!(cfg.model.threshold, 1.17);
        assert_eq!(cfg.embedder.dimension, 64);
        assert_eq!(cfg.explain.excluded_relations.len(), 9);
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[paths]\nkg = \"kg.tsv\"\nmodel = \"/abs/model.json\"\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.paths.kg.unwrap(), dir.path().join("kg.tsv"));
        assert_eq!(cfg.paths.model.unwrap(), PathBuf::from("/abs/model.json"));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(Config::from_toml("seed = \"x\"").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[embedder]\ndimension = 4\n").unwrap();
        assert!(Config::load(&path).is_err());
    }
}
