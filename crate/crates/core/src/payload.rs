//! Explanation payload served to the feedback UI, gated by condition.
//!
//! Field groups per feature: `scores` (S); `score_kind` and `highlights`
//! (A); `edits` (X); `suggestions` (C). Fields of disabled features are
//! omitted entirely. Spans are byte offsets into the submitted text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::condition::FeedbackFlags;
use crate::explain::{AttributionSet, Contrast, EditKind, ScoreKind, Suggestion};
use crate::scoring::ScorePair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadScores {
    pub quality_pct: f64,
    /// Display value, clamped to `[0, 100]`.
    pub diversity_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub token: String,
    pub span: [usize; 2],
    pub sub_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditItem {
    pub kind: EditKind,
    pub token: String,
    pub benefit: f64,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionItem {
    pub term: String,
    pub relation: String,
    /// Projected quality change, percentage points.
    pub dq: f64,
    /// Projected diversity change, percentage points.
    pub dd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_kind: Option<ScoreKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PayloadScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlights: Option<Vec<Highlight>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<EditItem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestions: Option<BTreeMap<String, Vec<SuggestionItem>>>,
}

/// Everything computed for one message; the payload exposes a gated subset.
#[derive(Debug, Clone, Default)]
pub struct ExplanationParts {
    pub scores: Option<ScorePair>,
    pub attribution: Option<AttributionSet>,
    pub contrast: Option<Contrast>,
    pub suggestions: Option<BTreeMap<String, Vec<Suggestion>>>,
}

pub fn highlights(attr: &AttributionSet) -> Vec<Highlight> {
    attr.highlighted
        .iter()
        .filter_map(|t| attr.entry(t))
        .map(|e| Highlight {
            token: e.token.clone(),
            span: e.spans.first().map(|&(s, t)| [s, t]).unwrap_or([0, 0]),
            sub_score: e.sub_score(),
        })
        .collect()
}

impl ExplanationPayload {
    pub fn build(parts: &ExplanationParts, kind: ScoreKind, flags: FeedbackFlags) -> Self {
        let mut p = Self::default();
        if flags.show_scores {
            p.scores = parts
                .scores
                .map(|s| PayloadScores { quality_pct: s.quality_pct, diversity_pct: s.display_diversity_pct });
        }
        if flags.show_attribution {
            p.score_kind = Some(kind);
            p.highlights = Some(parts.attribution.as_ref().map(highlights).unwrap_or_default());
        }
        if flags.show_contrastive {
            p.edits = Some(
                parts
                    .contrast
                    .iter()
                    .flat_map(|c| &c.edits)
                    .map(|e| EditItem {
                        kind: e.edit_kind,
                        token: e.token.clone(),
                        benefit: e.benefit,
                        from: e.iteration_from,
                        to: e.iteration_to,
                    })
                    .collect(),
            );
        }
        if flags.show_counterfactual {
            p.suggestions = Some(
                parts
                    .suggestions
                    .iter()
                    .flatten()
                    .map(|(tok, list)| {
                        let items = list
                            .iter()
                            .map(|s| SuggestionItem {
                                term: s.replacement_term.clone(),
                                relation: s.relation.clone(),
                                dq: s.delta_quality_pct,
                                dd: s.delta_diversity_pct,
                            })
                            .collect();
                        (tok.clone(), items)
                    })
                    .collect(),
            );
        }
        p
    }

    /// Top-level JSON keys present in this payload.
    pub fn field_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.score_kind.is_some() {
            out.push("score_kind");
        }
        if self.scores.is_some() {
            out.push("scores");
        }
        if self.highlights.is_some() {
            out.push("highlights");
        }
        if self.edits.is_some() {
            out.push("edits");
        }
        if self.suggestions.is_some() {
            out.push("suggestions");
        }
        out
    }
}
