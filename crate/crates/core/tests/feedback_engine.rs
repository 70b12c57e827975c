mod common;

use std::path::PathBuf;
use std::sync::Arc;

use ideafeed_core::condition::Condition;
use ideafeed_core::corpus::{CorpusStore, PromptSet};
use ideafeed_core::feedback::{FeedbackEngine, Submission, View};
use ideafeed_core::payload::ExplanationPayload;
use ideafeed_core::{Config, Error, ScoreKind};

fn engine() -> FeedbackEngine {
    let cfg = Config::load(&PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/default.toml"))).unwrap();
    let store = CorpusStore::in_memory(common::embedder());
    for c in Condition::ALL {
        store.init_corpus(c, &common::seeds(), 50, None).unwrap();
    }
    let prompts = PromptSet::from_file(&common::fixture("prompts.txt")).unwrap();
    FeedbackEngine::new(
        common::model(),
        Arc::new(common::graph()),
        Arc::new(store),
        Arc::new(prompts),
        cfg.explain,
        7,
    )
    .unwrap()
}

const DRAFTS: [&str; 3] = [
    "Take a walk during your lunch break",
    "Take a brisk walk with a friend during your lunch break",
    "Take a brisk walk with a friend around the lake during your lunch break",
];

fn expected_fields(c: Condition) -> Vec<&'static str> {
    let f = c.flags();
    let mut v = Vec::new();
    if f.show_attribution {
        v.push("score_kind");
    }
    if f.show_scores {
        v.push("scores");
    }
    if f.show_attribution {
        v.push("highlights");
    }
    if f.show_contrastive {
        v.push("edits");
    }
    if f.show_counterfactual {
        v.push("suggestions");
    }
    v
}

fn json_keys(p: &ExplanationPayload) -> Vec<String> {
    let v = serde_json::to_value(p).unwrap();
    let mut keys: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    keys
}

#[test]
fn payload_gating_for_every_condition() {
    let e = engine();
    for c in Condition::ALL {
        let info = e.create_session(c.as_str()).unwrap();
        assert_eq!(info.flags, c.flags());
        for (i, text) in DRAFTS.iter().enumerate() {
            let it = i as u32 + 1;
            let r = e
                .submit(&info.session_id, &Submission { prompt_id: info.first_prompt.id, text: text.to_string(), iteration: it })
                .unwrap();
            let mut want: Vec<String> = expected_fields(c).into_iter().map(String::from).collect();
            want.sort();
            assert_eq!(json_keys(&r.payload), want, "{c} iteration {it}");
            assert_eq!(r.default_view, View::default_for(c.flags(), it));
            if c.flags().show_contrastive && it >= 2 {
                assert!(!r.payload.edits.as_ref().unwrap().is_empty(), "{c} iteration {it} has edits");
            }
            if let Some(h) = &r.payload.highlights {
                assert_eq!(h.len(), 3);
                assert!(h.iter().all(|x| x.sub_score <= 0.0));
                assert!(h.iter().all(|x| text[x.span[0]..x.span[1]].eq_ignore_ascii_case(&x.token)));
            }
            if let Some(s) = &r.payload.scores {
                assert!((0.0..=100.0).contains(&s.diversity_pct));
            }
            assert_eq!(r.finalized, it == 3);
        }
    }
}

#[test]
fn session_flow_and_corpus_growth() {
    let e = engine();
    let info = e.create_session("SAX").unwrap();
    let sid = info.session_id.as_str();
    let p = info.first_prompt.id;
    let sub = |text: &str, iteration| Submission { prompt_id: p, text: text.into(), iteration };
    assert!(matches!(e.submit(sid, &sub("x", 2)), Err(Error::IterationOutOfOrder { expected: 1, got: 2 })));
    let r1 = e.submit(sid, &sub(DRAFTS[0], 1)).unwrap();
    assert_eq!(r1.record.parent, None);
    let r2 = e.submit(sid, &sub(DRAFTS[1], 2)).unwrap();
    assert_eq!(r2.record.parent.as_deref(), Some(r1.record.id.as_str()));
    assert_eq!(e.health().corpus_versions[&Condition::SAX], 1);
    let r3 = e.submit(sid, &sub(DRAFTS[2], 3)).unwrap();
    assert!(r3.finalized);
    let next = r3.next_prompt.unwrap();
    assert_ne!(next.id, p);
    assert_eq!(e.health().corpus_versions[&Condition::SAX], 2);
    assert_eq!(e.health().corpus_versions[&Condition::SA], 1);
    assert!(matches!(e.submit(sid, &sub("again", 4)), Err(Error::NotFound(_))));

    // feedback is recomputed against the corpus the record was scored with
    let again = e.feedback(sid, &r3.record.id, ScoreKind::Diversity, None).unwrap();
    assert_eq!(again.record.scores, r3.record.scores);
    assert_eq!(again.default_view, View::Contrastive);
    assert_eq!(again.payload.edits, r3.payload.edits);
    let vs1 = e.feedback(sid, &r3.record.id, ScoreKind::Quality, Some(1)).unwrap();
    let benefit: f64 = vs1.payload.edits.as_ref().unwrap().iter().map(|x| x.benefit).sum();
    let dq = r3.record.scores.quality_pct - r1.record.scores.quality_pct;
    assert!((benefit - dq).abs() < 1e-9);
    assert!(matches!(e.feedback(sid, &r1.record.id, ScoreKind::Diversity, Some(1)), Err(Error::CompareUnavailable(_))));
    assert!(matches!(e.feedback(sid, "nope", ScoreKind::Diversity, None), Err(Error::NotFound(_))));
}

#[test]
fn compare_needs_contrastive_condition() {
    let e = engine();
    let info = e.create_session("SA").unwrap();
    let p = info.first_prompt.id;
    e.submit(&info.session_id, &Submission { prompt_id: p, text: DRAFTS[0].into(), iteration: 1 }).unwrap();
    let r = e.submit(&info.session_id, &Submission { prompt_id: p, text: DRAFTS[1].into(), iteration: 2 }).unwrap();
    let err = e.feedback(&info.session_id, &r.record.id, ScoreKind::Diversity, Some(1)).unwrap_err();
    assert!(matches!(err, Error::CompareUnavailable(_)));
    let plain = e.feedback(&info.session_id, &r.record.id, ScoreKind::Diversity, None).unwrap();
    assert!(plain.payload.edits.is_none());
}

#[test]
fn input_validation() {
    let e = engine();
    assert!(matches!(e.create_session("SX"), Err(Error::InvalidCondition(_))));
    let info = e.create_session("N").unwrap();
    let long = "a".repeat(2001);
    let err = e
        .submit(&info.session_id, &Submission { prompt_id: info.first_prompt.id, text: long, iteration: 1 })
        .unwrap_err();
    assert!(matches!(err, Error::TextTooLong(2001)));
    let wrong = (info.first_prompt.id + 1) % 50;
    let err = e.submit(&info.session_id, &Submission { prompt_id: wrong, text: "x".into(), iteration: 1 }).unwrap_err();
    assert!(matches!(err, Error::NotFound(_)));
    assert!(matches!(
        e.submit("s999999", &Submission { prompt_id: 0, text: "x".into(), iteration: 1 }),
        Err(Error::NotFound(_))
    ));
    // stop-word-only text is still scored, just without highlights
    let r = e
        .submit(&info.session_id, &Submission { prompt_id: info.first_prompt.id, text: "the and of".into(), iteration: 1 })
        .unwrap();
    assert!(r.record.scores.degenerate);
}

#[test]
fn sessions_draw_different_prompts() {
    let e = engine();
    let firsts: std::collections::BTreeSet<usize> = (0..10).map(|_| e.create_session("S").unwrap().first_prompt.id).collect();
    assert!(firsts.len() > 1);
}

#[test]
fn payload_fixtures_deserialize() {
    for (name, condition) in [("payload_suggestions.json", Condition::SAXC), ("payload_edits.json", Condition::SAX)] {
        let raw = std::fs::read_to_string(common::fixture(name)).unwrap();
        let p: ExplanationPayload = serde_json::from_str(&raw).unwrap();
        let mut want: Vec<String> = expected_fields(condition).into_iter().map(String::from).collect();
        want.sort();
        assert_eq!(json_keys(&p), want, "{name}");
        assert_eq!(serde_json::to_value(&p).unwrap(), serde_json::from_str::<serde_json::Value>(&raw).unwrap());
    }
    let raw = std::fs::read_to_string(common::fixture("payload_suggestions.json")).unwrap();
    let p: ExplanationPayload = serde_json::from_str(&raw).unwrap();
    let s = p.suggestions.unwrap();
    let musical = s["time"].iter().find(|x| x.term == "musical time").unwrap();
    assert_eq!(musical.dd, 1.0);
    let dream = s["time"].iter().find(|x| x.term == "dreamlining").unwrap();
    assert_eq!(dream.dq, 2.0);
}
