//! Corpus-level diversity metrics and a seeded bootstrap harness.
//!
//! All distances are angular (radians). Dispersion is the MST edge-weight
//! sum or mean, disparity the mean pairwise distance, and the repeller
//! Chamfer distance the mean over new points of the distance to the
//! nearest prior point.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{angle, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::mst::mst_of_points;

pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DispersionSum,
    DispersionMean,
    Disparity,
    RepellerChamfer,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Self::DispersionSum, Self::DispersionMean, Self::Disparity, Self::RepellerChamfer];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DispersionSum => "dispersion_sum",
            Self::DispersionMean => "dispersion_mean",
            Self::Disparity => "disparity",
            Self::RepellerChamfer => "repeller_chamfer",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {s:?}")))
    }
}

/// `(mst_sum, mst_mean)` over the complete angular-distance graph.
pub fn dispersion(points: &[EmbeddingVector]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let tree = mst_of_points(points);
    Ok((tree.total, tree.total / (points.len() - 1) as f64))
}

pub fn disparity(points: &[EmbeddingVector]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += angle(points[i].as_slice(), points[j].as_slice());
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

pub fn repeller_chamfer(new_points: &[EmbeddingVector], prior: &[EmbeddingVector]) -> Result<f64> {
    if new_points.is_empty() || prior.is_empty() {
        return Err(Error::EmptySet);
    }
    let sum: f64 = new_points
        .iter()
        .map(|p| prior.iter().map(|q| angle(p.as_slice(), q.as_slice())).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(sum / new_points.len() as f64)
}

/// Evaluate `metric` on `points`. With a prior set, dispersion and
/// disparity are taken over `prior ∪ points`; the Chamfer distance
/// requires one.
pub fn evaluate(metric: Metric, points: &[EmbeddingVector], prior: Option<&[EmbeddingVector]>) -> Result<f64> {
    let joined;
    let pool: &[EmbeddingVector] = match prior {
        Some(p) if metric != Metric::RepellerChamfer => {
            joined = [p, points].concat();
            &joined
        }
        _ => points,
    };
    match metric {
        Metric::DispersionSum => Ok(dispersion(pool)?.0),
        Metric::DispersionMean => Ok(dispersion(pool)?.1),
        Metric::Disparity => disparity(pool),
        Metric::RepellerChamfer => repeller_chamfer(points, prior.unwrap_or_default()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_samples: usize,
    pub mean: f64,
    /// Sample standard deviation of the bootstrap statistics.
    pub stderr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub value: f64,
    pub n_points: usize,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Resample `points` with replacement (`sample_size` draws, default
/// `points.len()`), evaluate each resample, and summarise. The prior set is
/// held fixed. Statistics are aggregated in sorted order.
pub fn bootstrap(
    metric: Metric,
    points: &[EmbeddingVector],
    prior: Option<&[EmbeddingVector]>,
    n_samples: usize,
    sample_size: Option<usize>,
    seed: u64,
) -> Result<MetricReport> {
    let value = evaluate(metric, points, prior)?;
    if n_samples == 0 {
        return Ok(MetricReport { metric, value, n_points: points.len(), bootstrap: None });
    }
    let size = sample_size.unwrap_or(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let sample: Vec<EmbeddingVector> =
            (0..size).map(|_| points[rng.gen_range(0..points.len())].clone()).collect();
        stats.push(evaluate(metric, &sample, prior)?);
    }
    stats.sort_by(f64::total_cmp);
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let stderr = if stats.len() > 1 {
        (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MetricReport {
        metric,
        value,
        n_points: points.len(),
        bootstrap: Some(BootstrapSummary { n_samples, mean, stderr, seed }),
    })
}

/// Bootstrap over ideation texts. Each text is embedded once; resampling
/// texts and re-embedding gives the same vectors since embedding is pure.
pub fn bootstrap_texts<S: AsRef<str>>(
    metric: Metric,
    texts: &[S],
    prior_texts: Option<&[S]>,
    embedder: &dyn Embedder,
    n_samples: usize,
    seed: u64,
) -> Result<MetricReport> {
    let embed = |ts: &[S]| -> Result<Vec<EmbeddingVector>> {
        let refs: Vec<&str> = ts.iter().map(AsRef::as_ref).collect();
        Ok(embedder.embed_many(&refs)?.into_iter().map(|e| e.vector).collect())
    };
    let points = embed(texts)?;
    let prior = prior_texts.map(embed).transpose()?;
    bootstrap(metric, &points, prior.as_deref(), n_samples, None, seed)
}
