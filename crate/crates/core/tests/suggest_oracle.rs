//! Counterfactual suggestions: exhaustive candidate enumeration and
//! independent rechecking of every filter.

mod common;

use std::collections::BTreeSet;

use ideafeed_core::embedding::angular_distance;
use ideafeed_core::explain::{attribute_top, suggest, LinearScorer, ScoreFunction, ScoreKind, SuggestConfig, SuggestContext};
use ideafeed_core::kg::{KnowledgeEdge, KnowledgeGraph, RelationFilter, DEFAULT_EXCLUDED};
use ideafeed_core::text::{lemmatize, replace_token, tokenize};

fn edge(rel: &str, a: &str, b: &str, w: f64) -> KnowledgeEdge {
    KnowledgeEdge { relation: rel.into(), start_term: a.into(), end_term: b.into(), weight: w }
}

const NEIGHBOURS: [&str; 12] =
    ["gym", "sport", "yoga", "jogging", "stretching", "sweat", "health", "training", "rowing", "swimming", "cycling", "hiking"];

/// Twelve neighbours of "exercise" plus two excluded-relation edges.
fn toy_graph() -> KnowledgeGraph {
    let mut edges: Vec<KnowledgeEdge> =
        NEIGHBOURS.iter().enumerate().map(|(i, n)| edge("RelatedTo", "exercise", n, 1.0 + i as f64 * 0.1)).collect();
    edges.push(edge("Synonym", "exercise", "workout", 5.0));
    edges.push(edge("Antonym", "exercise", "rest", 5.0));
    KnowledgeGraph::from_edges(edges)
}

fn toy_scorer() -> LinearScorer {
    let mut lin = LinearScorer::default();
    lin.diversity.insert("exercise".into(), -4.0);
    lin.diversity.insert("daily".into(), 1.0);
    lin.diversity.insert("gym".into(), 2.0);
    lin.diversity.insert("yoga".into(), -5.0);
    lin.diversity.insert("hiking".into(), 1.0);
    lin.diversity.insert("rowing".into(), -4.5);
    lin.quality.insert("rowing".into(), 3.0);
    lin.diversity.insert("workout".into(), 9.0);
    lin
}

#[test]
fn toy_case_matches_exhaustive_enumeration() {
    let text = "exercise daily";
    let lin = toy_scorer();
    let g = toy_graph();
    let e = common::embedder();
    let prior = common::corpus(e.as_ref());
    let attr = attribute_top(text, &lin, ScoreKind::Diversity, 3).unwrap();
    assert!(attr.highlighted.contains(&"exercise".to_string()));
    // loose distance bounds; omega decides (a neutral word gains 4)
    let omega = 4.5;
    let cfg = SuggestConfig { delta_corpus: Some(10.0), delta_anchor: 10.0, omega, top_k: 10, ..Default::default() };
    let ctx = SuggestContext::new(e.as_ref(), prior.embeddings(), 10.0, &cfg.anchors).unwrap();
    let got = suggest(text, &attr, &lin, &g, &ctx, &cfg).unwrap();

    // oracle: try every neighbour of "exercise" through every relation
    let base = lin.scores(text).unwrap();
    let mut expected = BTreeSet::new();
    for n in NEIGHBOURS.iter().chain(["workout", "rest"].iter()) {
        let rel_ok = !["workout", "rest"].contains(n);
        let s = lin.scores(&format!("{n} daily")).unwrap();
        let gain = s.diversity - base.diversity;
        if rel_ok && gain > omega && (s.diversity > base.diversity || s.quality > base.quality) {
            expected.insert(n.to_string());
        }
    }
    assert_eq!(expected, BTreeSet::from(["gym".to_string(), "hiking".to_string()]));
    let found: BTreeSet<String> = got["exercise"].iter().map(|s| s.replacement_term.clone()).collect();
    assert_eq!(found, expected);
    assert_eq!(got["exercise"][0].replacement_term, "gym");
}

#[test]
fn too_few_neighbours_gives_empty_list() {
    let lin = toy_scorer();
    let g = KnowledgeGraph::from_edges(NEIGHBOURS[..9].iter().map(|n| edge("RelatedTo", "exercise", n, 1.0)).collect());
    let e = common::embedder();
    let prior = common::corpus(e.as_ref());
    let attr = attribute_top("exercise daily", &lin, ScoreKind::Diversity, 3).unwrap();
    let cfg = SuggestConfig { delta_corpus: Some(10.0), delta_anchor: 10.0, ..Default::default() };
    let ctx = SuggestContext::new(e.as_ref(), prior.embeddings(), 10.0, &cfg.anchors).unwrap();
    let got = suggest("exercise daily", &attr, &lin, &g, &ctx, &cfg).unwrap();
    assert!(got["exercise"].is_empty());
}

#[test]
fn fixture_suggestions_pass_independent_rechecks() {
    let s = common::scorer();
    let g = common::graph();
    let e = common::embedder();
    let snap = s.corpus.clone();
    let delta_corpus = snap.pairwise_quantile(0.75);
    let mut emitted = 0;
    for delta_anchor in [1.2, 1.58] {
        let cfg = SuggestConfig { delta_anchor, ..Default::default() };
        let ctx = SuggestContext::new(e.as_ref(), snap.embeddings(), delta_corpus, &cfg.anchors).unwrap();
        let anchors: Vec<_> = cfg.anchors.iter().map(|a| e.embed(a).unwrap().vector).collect();
        for text in common::messages() {
            for kind in [ScoreKind::Diversity, ScoreKind::Quality] {
                let attr = attribute_top(&text, &s, kind, 3).unwrap();
                let out = suggest(&text, &attr, &s, &g, &ctx, &cfg).unwrap();
                let base = s.scores(&text).unwrap();
                for (token, list) in &out {
                    assert!(list.len() <= 3);
                    assert!(attr.highlighted.contains(token));
                    for sug in list {
                        emitted += 1;
                        // source word has at least 10 allowed neighbours
                        let lemma = lemmatize(token);
                        let n = g.related_words(&lemma, &RelationFilter::default()).len();
                        let n = if n == 0 { g.related_words(token, &RelationFilter::default()).len() } else { n };
                        assert!(n >= 10, "{token}: {n} neighbours");
                        // relation is allowed and the edge exists
                        assert!(!DEFAULT_EXCLUDED.contains(&sug.relation.as_str()));
                        assert!(g.edges().iter().any(|ed| ed.relation == sug.relation
                            && ((ed.start_term == lemma || ed.start_term == *token) && ed.end_term == sug.replacement_term
                                || (ed.end_term == lemma || ed.end_term == *token) && ed.start_term == sug.replacement_term)));
                        // distance filters, recomputed from scratch
                        let v = e.embed(&sug.replacement_term).unwrap().vector;
                        let mean: f64 = snap.embeddings().iter().map(|p| angular_distance(&v, p).unwrap()).sum::<f64>()
                            / snap.len() as f64;
                        assert!(mean <= delta_corpus);
                        let near = anchors.iter().map(|a| angular_distance(&v, a).unwrap()).fold(f64::INFINITY, f64::min);
                        assert!(near <= delta_anchor);
                        // projected deltas by rescoring the substituted text
                        let after = s.scores(&replace_token(&text, token, &sug.replacement_term)).unwrap();
                        let dq = after.quality - base.quality;
                        let dd = after.diversity - base.diversity;
                        assert!((dq - sug.delta_quality_pct).abs() < 1e-12);
                        assert!((dd - sug.delta_diversity_pct).abs() < 1e-12);
                        assert!(dq > 0.0 || dd > 0.0);
                        assert!(after.get(kind) - base.get(kind) > 0.0);
                        assert!(!tokenize(&sug.replacement_term).is_empty());
                    }
                }
            }
        }
    }
    assert!(emitted > 0, "fixture graph produced no suggestions to check");
}
