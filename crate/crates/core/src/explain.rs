//! Ablation attributions, contrastive edit attributions and counterfactual
//! word suggestions over an arbitrary score function.
//!
//! All three explainers only call [`ScoreFunction::scores`] on edited
//! versions of the message, so they work unchanged for the learned quality
//! score, the corpus diversity score, or any other scorer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::IdeationRecord;
use crate::embedding::{angular_distance, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeSource, RelationFilter};
use crate::text::{append_token, lemmatize, remove_occurrences, remove_token, replace_token, tokenize, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[default]
    Diversity,
    Quality,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Diversity => "diversity",
            Self::Quality => "quality",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diversity" => Ok(Self::Diversity),
            "quality" => Ok(Self::Quality),
            other => Err(Error::InvalidConfig(format!("unknown score kind {other:?}"))),
        }
    }
}

/// The score vector `s = (s_q, s_d)`, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreVector {
    pub quality: f64,
    pub diversity: f64,
}

impl ScoreVector {
    pub fn get(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Quality => self.quality,
            ScoreKind::Diversity => self.diversity,
        }
    }
}

pub trait ScoreFunction: Sync {
    fn scores(&self, text: &str) -> Result<ScoreVector>;

    fn score(&self, text: &str, kind: ScoreKind) -> Result<f64> {
        Ok(self.scores(text)?.get(kind))
    }
}

impl<F> ScoreFunction for F
where
    F: Fn(&str) -> Result<ScoreVector> + Sync,
{
    fn scores(&self, text: &str) -> Result<ScoreVector> {
        self(text)
    }
}

/// Bag-of-words scorer: each score is a bias plus the sum of per-token
/// weights over all tokens. Used for demos and to exercise the explainers
/// against a scorer with known structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub quality_bias: f64,
    pub diversity_bias: f64,
    pub quality: BTreeMap<String, f64>,
    pub diversity: BTreeMap<String, f64>,
}

impl ScoreFunction for LinearScorer {
    fn scores(&self, text: &str) -> Result<ScoreVector> {
        let tl = tokenize(text);
        let mut s = ScoreVector { quality: self.quality_bias, diversity: self.diversity_bias };
        for t in &tl.tokens {
            s.quality += self.quality.get(t).copied().unwrap_or(0.0);
            s.diversity += self.diversity.get(t).copied().unwrap_or(0.0);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub token: String,
    /// Byte spans of every occurrence.
    pub spans: Vec<Span>,
    /// `-(s(x) - s(x without token))`: positive when removing the token
    /// would raise the score.
    pub raw_w: f64,
    /// `raw_w - min(raw_w)`; the largest values mark the words to change.
    pub change_priority: f64,
}

impl AttributionEntry {
    /// Value shown to users: `-change_priority`, never positive.
    pub fn sub_score(&self) -> f64 {
        -self.change_priority
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub score_kind: ScoreKind,
    pub base_score: f64,
    /// One entry per distinct content token, in order of first appearance.
    pub entries: Vec<AttributionEntry>,
    /// Highlighted tokens, highest change priority first.
    pub highlighted: Vec<String>,
}

impl AttributionSet {
    pub fn entry(&self, token: &str) -> Option<&AttributionEntry> {
        self.entries.iter().find(|e| e.token == token)
    }
}

pub const HIGHLIGHT_LIMIT: usize = 3;

/// Top `k` tokens by descending value, ties broken lexicographically.
pub fn top_k(values: &[(String, f64)], k: usize) -> Vec<String> {
    let mut v: Vec<&(String, f64)> = values.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter().take(k).map(|(t, _)| t.clone()).collect()
}

/// Ablation attribution for each distinct content token: all occurrences
/// are removed at once and the message is rescored.
pub fn attribute(text: &str, score_fn: &dyn ScoreFunction, kind: ScoreKind) -> Result<AttributionSet> {
    attribute_top(text, score_fn, kind, HIGHLIGHT_LIMIT)
}

pub fn attribute_top(text: &str, score_fn: &dyn ScoreFunction, kind: ScoreKind, k: usize) -> Result<AttributionSet> {
    let tl = tokenize(text);
    let distinct = tl.distinct_content();
    if distinct.is_empty() {
        return Err(Error::NoContentTokens);
    }
    let base = score_fn.score(text, kind)?;
    let mut entries = Vec::with_capacity(distinct.len());
    for tok in distinct {
        let ablated = score_fn.score(&remove_token(text, tok), kind)?;
        entries.push(AttributionEntry {
            token: tok.to_string(),
            spans: tl.spans_of(tok),
            raw_w: -(base - ablated),
            change_priority: 0.0,
        });
    }
    let min = entries.iter().map(|e| e.raw_w).fold(f64::INFINITY, f64::min);
    for e in &mut entries {
        e.change_priority = e.raw_w - min;
    }
    let ranked: Vec<(String, f64)> = entries.iter().map(|e| (e.token.clone(), e.change_priority)).collect();
    Ok(AttributionSet { score_kind: kind, base_score: base, highlighted: top_k(&ranked, k), entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Insertion,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditAttribution {
    pub edit_kind: EditKind,
    pub token: String,
    /// How many occurrences were inserted or deleted.
    pub count: usize,
    /// Benefit before calibration.
    pub raw_benefit: f64,
    /// Calibrated benefit; positive = beneficial edit, negative = detrimental.
    pub benefit: f64,
    pub iteration_from: u32,
    pub iteration_to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub score_kind: ScoreKind,
    pub earlier_score: f64,
    pub later_score: f64,
    /// `s(later) - s(earlier)`.
    pub delta: f64,
    pub edits: Vec<EditAttribution>,
}

/// Contrast two iterations of one ideation (same session and prompt).
pub fn contrast(
    earlier: &IdeationRecord,
    later: &IdeationRecord,
    score_fn: &dyn ScoreFunction,
    kind: ScoreKind,
) -> Result<Contrast> {
    if earlier.session_id != later.session_id || earlier.prompt_id != later.prompt_id {
        return Err(Error::LineageMismatch);
    }
    contrast_texts(&earlier.text, &later.text, earlier.iteration, later.iteration, score_fn, kind)
}

/// Contrastive attribution between two texts. Edits are the multiset
/// difference of content tokens, one edit per distinct token whose count
/// changed; when only stop words differ, the stop words are used instead. Benefits are min-max normalised to `[0, 1]` (all equal → 0.5)
/// and shifted by a common constant so they sum to `delta`.
pub fn contrast_texts(
    earlier: &str,
    later: &str,
    iteration_from: u32,
    iteration_to: u32,
    score_fn: &dyn ScoreFunction,
    kind: ScoreKind,
) -> Result<Contrast> {
    let s1 = score_fn.score(earlier, kind)?;
    let s2 = score_fn.score(later, kind)?;
    let delta = s2 - s1;

    let count = |text: &str, content_only: bool| {
        let tl = tokenize(text);
        let mut m: BTreeMap<String, i64> = BTreeMap::new();
        for (t, &content) in tl.tokens.iter().zip(&tl.content_mask) {
            if content || !content_only {
                *m.entry(t.clone()).or_default() += 1;
            }
        }
        m
    };
    let (mut c1, mut c2) = (count(earlier, true), count(later, true));
    // Stop-word-only revisions still move the length feature; attribute
    // them to the stop words rather than to nothing.
    if c1 == c2 {
        (c1, c2) = (count(earlier, false), count(later, false));
    }
    let tokens: BTreeSet<&String> = c1.keys().chain(c2.keys()).collect();

    let mut edits = Vec::new();
    for tok in tokens {
        let diff = c2.get(tok).copied().unwrap_or(0) - c1.get(tok).copied().unwrap_or(0);
        if diff == 0 {
            continue;
        }
        let n = diff.unsigned_abs() as usize;
        let (edit_kind, raw) = if diff > 0 {
            let without = score_fn.score(&remove_occurrences(later, tok, n), kind)?;
            (EditKind::Insertion, s2 - without)
        } else {
            let with = score_fn.score(&append_token(later, tok, n), kind)?;
            (EditKind::Deletion, s2 - with)
        };
        edits.push(EditAttribution {
            edit_kind,
            token: tok.clone(),
            count: n,
            raw_benefit: raw,
            benefit: raw,
            iteration_from,
            iteration_to,
        });
    }
    calibrate(&mut edits, delta);
    Ok(Contrast { score_kind: kind, earlier_score: s1, later_score: s2, delta, edits })
}

fn calibrate(edits: &mut [EditAttribution], delta: f64) {
    if edits.is_empty() {
        return;
    }
    let lo = edits.iter().map(|e| e.raw_benefit).fold(f64::INFINITY, f64::min);
    let hi = edits.iter().map(|e| e.raw_benefit).fold(f64::NEG_INFINITY, f64::max);
    for e in edits.iter_mut() {
        e.benefit = if hi > lo { (e.raw_benefit - lo) / (hi - lo) } else { 0.5 };
    }
    let total: f64 = edits.iter().map(|e| e.benefit).sum();
    let shift = (delta - total) / edits.len() as f64;
    for e in edits.iter_mut() {
        e.benefit += shift;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestConfig {
    /// Maximum mean angular distance from a candidate word to the prior
    /// ideations. `None` means the 75th percentile of prior pairwise
    /// distances, resolved when the corpus is known.
    pub delta_corpus: Option<f64>,
    /// Maximum distance from a candidate to its nearest anchor term.
    pub delta_anchor: f64,
    /// Minimum attribution gain for the selected score.
    pub omega: f64,
    pub top_k: usize,
    /// Source words with fewer related terms are skipped.
    pub min_related: usize,
    pub anchors: Vec<String>,
    pub filter: RelationFilter,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            delta_corpus: None,
            delta_anchor: 1.2,
            omega: 0.0,
            top_k: 3,
            min_related: 10,
            anchors: vec!["exercise".into(), "physical activity".into()],
            filter: RelationFilter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub source_token: String,
    pub replacement_term: String,
    pub relation: String,
    /// Knowledge-graph edge weight, metadata only.
    pub edge_weight: f64,
    pub delta_quality_pct: f64,
    pub delta_diversity_pct: f64,
    /// Gain in the attribution's score kind.
    pub attribution_gain: f64,
    pub corpus_distance: f64,
    pub anchor_distance: f64,
}

impl Suggestion {
    pub fn best_delta(&self) -> f64 {
        self.delta_quality_pct.max(self.delta_diversity_pct)
    }
}

/// Embedding context needed by the relevance filters.
pub struct SuggestContext<'a> {
    pub embedder: &'a dyn Embedder,
    pub prior: &'a [EmbeddingVector],
    /// Resolved corpus threshold.
    pub delta_corpus: f64,
    pub anchors: Vec<EmbeddingVector>,
}

impl<'a> SuggestContext<'a> {
    pub fn new(embedder: &'a dyn Embedder, prior: &'a [EmbeddingVector], delta_corpus: f64, anchors: &[String]) -> Result<Self> {
        let anchors = anchors.iter().map(|a| embedder.embed(a).map(|e| e.vector)).collect::<Result<_>>()?;
        Ok(Self { embedder, prior, delta_corpus, anchors })
    }

    pub fn mean_corpus_distance(&self, v: &EmbeddingVector) -> Result<f64> {
        if self.prior.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for p in self.prior {
            sum += angular_distance(v, p)?;
        }
        Ok(sum / self.prior.len() as f64)
    }

    pub fn anchor_distance(&self, v: &EmbeddingVector) -> Result<f64> {
        let mut best = f64::INFINITY;
        for a in &self.anchors {
            best = best.min(angular_distance(v, a)?);
        }
        Ok(best)
    }
}

/// Counterfactual suggestions for each highlighted token. Every
/// highlighted token gets an entry; tokens whose lemma (or surface form)
/// has fewer than `min_related` allowed related terms get an empty list.
pub fn suggest(
    text: &str,
    attribution: &AttributionSet,
    score_fn: &dyn ScoreFunction,
    kg: &dyn KnowledgeSource,
    ctx: &SuggestContext<'_>,
    cfg: &SuggestConfig,
) -> Result<BTreeMap<String, Vec<Suggestion>>> {
    let base = score_fn.scores(text)?;
    let mut out = BTreeMap::new();
    for token in &attribution.highlighted {
        let lemma = lemmatize(token);
        let mut related = kg.related(&lemma, &cfg.filter)?;
        if related.is_empty() && lemma != *token {
            related = kg.related(token, &cfg.filter)?;
        }
        let mut kept = Vec::new();
        if related.len() >= cfg.min_related {
            for cand in related {
                if cand.term == *token || cand.term == lemma {
                    continue;
                }
                let v = ctx.embedder.embed(&cand.term)?.vector;
                let corpus_distance = ctx.mean_corpus_distance(&v)?;
                if corpus_distance > ctx.delta_corpus {
                    continue;
                }
                let anchor_distance = ctx.anchor_distance(&v)?;
                if anchor_distance > cfg.delta_anchor {
                    continue;
                }
                let s = score_fn.scores(&replace_token(text, token, &cand.term))?;
                let sug = Suggestion {
                    source_token: token.clone(),
                    replacement_term: cand.term,
                    relation: cand.relation,
                    edge_weight: cand.weight,
                    delta_quality_pct: s.quality - base.quality,
                    delta_diversity_pct: s.diversity - base.diversity,
                    attribution_gain: s.get(attribution.score_kind) - base.get(attribution.score_kind),
                    corpus_distance,
                    anchor_distance,
                };
                if sug.attribution_gain > cfg.omega && sug.best_delta() > 0.0 {
                    kept.push(sug);
                }
            }
        }
        kept.sort_by(|a, b| {
            b.best_delta()
                .total_cmp(&a.best_delta())
                .then_with(|| a.replacement_term.cmp(&b.replacement_term))
        });
        kept.truncate(cfg.top_k);
        out.insert(token.clone(), kept);
    }
    Ok(out)
}
