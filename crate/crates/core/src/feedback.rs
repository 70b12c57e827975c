//! The prompt → score → explain → revise loop behind the HTTP API.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::condition::{Condition, FeedbackFlags};
use crate::corpus::{CorpusSnapshot, CorpusStore, IdeationRecord, PromptDeck, PromptSet, MAX_ITERATIONS};
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::explain::{attribute_top, contrast, suggest, ScoreKind, SuggestContext};
use crate::kg::KnowledgeSource;
use crate::config::ExplainSettings;
use crate::payload::{ExplanationParts, ExplanationPayload};
use crate::scoring::{QualityModel, Scorer};

pub const MAX_TEXT_CHARS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: usize,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub condition: Condition,
    pub flags: FeedbackFlags,
    pub first_prompt: Prompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub prompt_id: usize,
    pub text: String,
    pub iteration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Scores,
    Attribution,
    Contrastive,
}

impl View {
    pub fn default_for(flags: FeedbackFlags, iteration: u32) -> Self {
        if flags.show_contrastive && iteration >= 2 {
            Self::Contrastive
        } else if flags.show_attribution {
            Self::Attribution
        } else {
            Self::Scores
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub record: IdeationRecord,
    pub payload: ExplanationPayload,
    pub default_view: View,
    /// The ideation was finalised and joined the condition's corpus.
    pub finalized: bool,
    pub next_prompt: Option<Prompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub corpus_versions: BTreeMap<Condition, u64>,
    pub model_hash: String,
}

struct StoredRecord {
    record: IdeationRecord,
    corpus: Arc<CorpusSnapshot>,
}

struct Session {
    condition: Condition,
    deck: PromptDeck,
    prompt: Option<usize>,
    /// Records of the ideation in progress, by iteration.
    lineage: Vec<usize>,
    records: Vec<StoredRecord>,
}

pub struct FeedbackEngine {
    embedder: Arc<dyn Embedder>,
    model: Arc<QualityModel>,
    kg: Arc<dyn KnowledgeSource>,
    store: Arc<CorpusStore>,
    prompts: Arc<PromptSet>,
    settings: ExplainSettings,
    seed: u64,
    sessions: Mutex<HashMap<String, Session>>,
    counter: AtomicU64,
}

impl FeedbackEngine {
    pub fn new(
        model: Arc<QualityModel>,
        kg: Arc<dyn KnowledgeSource>,
        store: Arc<CorpusStore>,
        prompts: Arc<PromptSet>,
        settings: ExplainSettings,
        seed: u64,
    ) -> Result<Self> {
        let embedder = store.embedder().clone();
        if model.dim != embedder.dim() {
            return Err(Error::ModelMismatch { model: model.dim, embedder: embedder.dim() });
        }
        Ok(Self {
            embedder,
            model,
            kg,
            store,
            prompts,
            settings,
            seed,
            sessions: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn store(&self) -> &Arc<CorpusStore> {
        &self.store
    }

    pub fn model(&self) -> &Arc<QualityModel> {
        &self.model
    }

    pub fn scorer(&self, condition: Condition) -> Result<Scorer> {
        let corpus = self
            .store
            .snapshot(condition)
            .ok_or_else(|| Error::NotFound(format!("corpus for condition {condition} is not initialised")))?;
        Scorer::new(self.embedder.clone(), self.model.clone(), corpus)
    }

    /// Compute the explanation parts that `flags` asks for. Scores are
    /// always computed.
    pub fn explain_parts(
        &self,
        scorer: &Scorer,
        text: &str,
        kind: ScoreKind,
        flags: FeedbackFlags,
        compare_with: Option<(&IdeationRecord, &IdeationRecord)>,
    ) -> Result<ExplanationParts> {
        let mut parts = ExplanationParts { scores: Some(scorer.score(text)?), ..Default::default() };
        if flags.show_attribution || flags.show_counterfactual {
            parts.attribution = match attribute_top(text, scorer, kind, self.settings.highlight_k) {
                Ok(a) => Some(a),
                Err(Error::NoContentTokens) => None,
                Err(e) => return Err(e),
            };
        }
        if flags.show_contrastive {
            if let Some((earlier, later)) = compare_with {
                parts.contrast = Some(contrast(earlier, later, scorer, kind)?);
            }
        }
        if flags.show_counterfactual {
            if let Some(attr) = &parts.attribution {
                let cfg = self.settings.suggest_config();
                let delta_corpus = cfg
                    .delta_corpus
                    .unwrap_or_else(|| scorer.corpus.pairwise_quantile(self.settings.delta_corpus_quantile));
                let ctx = SuggestContext::new(
                    self.embedder.as_ref(),
                    scorer.corpus.embeddings(),
                    delta_corpus,
                    &cfg.anchors,
                )?;
                parts.suggestions = Some(suggest(text, attr, scorer, self.kg.as_ref(), &ctx, &cfg)?);
            }
        }
        Ok(parts)
    }

    fn session_seed(&self, n: u64) -> u64 {
        self.seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    pub fn create_session(&self, condition: &str) -> Result<SessionInfo> {
        let condition: Condition = condition.parse()?;
        if self.store.snapshot(condition).is_none() {
            return Err(Error::NotFound(format!("corpus for condition {condition} is not initialised")));
        }
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let mut deck = self.prompts.deck(self.session_seed(n));
        let prompt = deck.next_prompt()?;
        let id = format!("s{n:06}");
        self.sessions.lock().unwrap().insert(
            id.clone(),
            Session { condition, deck, prompt: Some(prompt), lineage: Vec::new(), records: Vec::new() },
        );
        Ok(SessionInfo {
            session_id: id,
            condition,
            flags: condition.flags(),
            first_prompt: self.prompt(prompt),
        })
    }

    fn prompt(&self, id: usize) -> Prompt {
        Prompt { id, phrase: self.prompts.phrases[id].clone() }
    }

    pub fn submit(&self, session_id: &str, sub: &Submission) -> Result<FeedbackResponse> {
        let chars = sub.text.chars().count();
        if chars > MAX_TEXT_CHARS {
            return Err(Error::TextTooLong(chars));
        }
        let (condition, previous) = {
            let sessions = self.sessions.lock().unwrap();
            let s = sessions.get(session_id).ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
            let current = s.prompt.ok_or(Error::PromptsExhausted)?;
            if sub.prompt_id != current {
                return Err(Error::NotFound(format!("prompt {} is not the session's current prompt", sub.prompt_id)));
            }
            let expected = s.lineage.len() as u32 + 1;
            if sub.iteration != expected || sub.iteration > MAX_ITERATIONS {
                return Err(Error::IterationOutOfOrder { expected, got: sub.iteration });
            }
            (s.condition, s.lineage.last().map(|&i| s.records[i].record.clone()))
        };

        let scorer = self.scorer(condition)?;
        let flags = condition.flags();
        let record = IdeationRecord {
            id: format!("{session_id}-p{}-i{}", sub.prompt_id, sub.iteration),
            session_id: session_id.to_string(),
            prompt_id: sub.prompt_id,
            condition,
            iteration: sub.iteration,
            text: sub.text.clone(),
            scores: scorer.score(&sub.text)?,
            parent: previous.as_ref().map(|p| p.id.clone()),
            corpus_version: scorer.corpus.version,
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        let kind = ScoreKind::default();
        let parts = self.explain_parts(&scorer, &record.text, kind, flags, previous.as_ref().map(|p| (p, &record)))?;
        let payload = ExplanationPayload::build(&parts, kind, flags);

        let finalized = record.iteration == MAX_ITERATIONS;
        let next_prompt = {
            let mut sessions = self.sessions.lock().unwrap();
            let s = sessions.get_mut(session_id).ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
            let expected = s.lineage.len() as u32 + 1;
            if s.prompt != Some(sub.prompt_id) || expected != sub.iteration {
                return Err(Error::IterationOutOfOrder { expected, got: sub.iteration });
            }
            s.records.push(StoredRecord { record: record.clone(), corpus: scorer.corpus.clone() });
            s.lineage.push(s.records.len() - 1);
            if finalized {
                s.lineage.clear();
                s.prompt = s.deck.next_prompt().ok();
                s.prompt
            } else {
                None
            }
        };
        if finalized {
            self.store.append_ideation(condition, &record)?;
        }
        Ok(FeedbackResponse {
            default_view: View::default_for(flags, record.iteration),
            record,
            payload,
            finalized,
            next_prompt: next_prompt.map(|id| self.prompt(id)),
        })
    }

    /// Recompute feedback for a stored record, optionally contrasting it
    /// with an earlier iteration of the same ideation.
    pub fn feedback(
        &self,
        session_id: &str,
        record_id: &str,
        kind: ScoreKind,
        compare: Option<u32>,
    ) -> Result<FeedbackResponse> {
        let (condition, stored, earlier) = {
            let sessions = self.sessions.lock().unwrap();
            let s = sessions.get(session_id).ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
            let stored = s
                .records
                .iter()
                .find(|r| r.record.id == record_id)
                .ok_or_else(|| Error::NotFound(format!("ideation {record_id}")))?;
            // contrastive conditions compare with the previous iteration unless told otherwise
            let x = s.condition.flags().show_contrastive;
            let compare = compare.or((x && stored.record.iteration >= 2).then(|| stored.record.iteration - 1));
            let earlier = match compare {
                None => None,
                Some(_) if !s.condition.flags().show_contrastive => {
                    return Err(Error::CompareUnavailable(format!("condition {} has no contrastive feedback", s.condition)))
                }
                Some(t) if t == 0 || t >= stored.record.iteration => {
                    return Err(Error::CompareUnavailable(format!(
                        "iteration {t} is not earlier than iteration {}",
                        stored.record.iteration
                    )))
                }
                Some(t) => s
                    .records
                    .iter()
                    .find(|r| r.record.prompt_id == stored.record.prompt_id && r.record.iteration == t)
                    .map(|r| r.record.clone()),
            };
            (s.condition, stored.record.clone(), (stored.corpus.clone(), earlier))
        };
        let (corpus, earlier) = earlier;
        let flags = condition.flags();
        let scorer = Scorer::new(self.embedder.clone(), self.model.clone(), corpus)?;
        let parts = self.explain_parts(&scorer, &stored.text, kind, flags, earlier.as_ref().map(|e| (e, &stored)))?;
        let view = if earlier.is_some() { View::Contrastive } else { View::default_for(flags, stored.iteration) };
        Ok(FeedbackResponse {
            payload: ExplanationPayload::build(&parts, kind, flags),
            record: stored,
            default_view: view,
            finalized: false,
            next_prompt: None,
        })
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            corpus_versions: self.store.versions(),
            model_hash: self.model.content_hash(),
        }
    }
}
