//! Embedding service and knowledge-graph clients against local mock servers.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use ideafeed_core::embedding::{Backend, Embedder, EmbedderConfig, ServiceEmbedder};
use ideafeed_core::kg::{KnowledgeSource, RelationFilter, RemoteGraph};
use ideafeed_core::Error;
use serde_json::{json, Value};

/// Serves `respond(path_and_query, body)` on a background thread and counts
/// requests.
fn mock<F>(respond: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(&str, &str) -> Value + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let target = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let out = respond(&target, &String::from_utf8_lossy(&body)).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{out}",
                out.len()
            );
        }
    });
    (addr, hits)
}

fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    addr
}

fn service_config(endpoint: String, cache: Option<std::path::PathBuf>) -> EmbedderConfig {
    EmbedderConfig {
        backend: Backend::ExternalService,
        dimension: 8,
        service_endpoint: Some(endpoint),
        cache_path: cache,
        timeout_secs: 5,
        ..EmbedderConfig::default()
    }
}

fn vectors_for(body: &str) -> Value {
    let req: Value = serde_json::from_str(body).unwrap();
    let vectors: Vec<Vec<f64>> = req["texts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let n = t.as_str().unwrap().len();
            (0..8).map(|i| if i == n % 8 { 3.0 } else { 0.0 }).collect()
        })
        .collect();
    json!({"vectors": vectors, "dim": 8})
}

#[test]
fn service_embedder_normalizes_and_caches() {
    let (url, hits) = mock(|_, body| vectors_for(body));
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let e = ServiceEmbedder::new(&service_config(url.clone(), Some(cache.clone()))).unwrap();
    let a = e.embed("walk daily").unwrap();
    assert!((a.vector.norm() - 1.0).abs() < 1e-12);
    assert_eq!(a.vector.as_slice()[10 % 8], 1.0);
    let many = e.embed_many(&["walk daily", "swim", "the and"]).unwrap();
    assert_eq!(many[0].vector, a.vector);
    assert!(many[2].degenerate, "stop-word-only text falls back");
    assert_eq!(hits.load(Ordering::SeqCst), 2);

    // a fresh client reads the cache instead of asking again
    let again = ServiceEmbedder::new(&service_config(url, Some(cache))).unwrap();
    assert_eq!(again.cache().unwrap().len(), 2);
    assert_eq!(again.embed("swim").unwrap().vector, many[1].vector);
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn service_embedder_reports_bad_dimension() {
    let (url, _) = mock(|_, _| json!({"vectors": [[1.0, 0.0]], "dim": 2}));
    let e = ServiceEmbedder::new(&service_config(url, None)).unwrap();
    assert!(matches!(e.embed("walk"), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn service_embedder_unreachable() {
    let e = ServiceEmbedder::new(&service_config(dead_endpoint(), None)).unwrap();
    let err = e.embed("walk").unwrap_err();
    assert!(matches!(err, Error::EmbeddingUnavailable(_)));
    assert!(err.is_dependency());
}

fn conceptnet(target: &str) -> Value {
    assert!(target.starts_with("/query?"), "{target}");
    assert!(target.contains("node=%2Fc%2Fen%2Fexercise") || target.contains("node=/c/en/exercise"), "{target}");
    json!({"edges": [
        {"rel": {"label": "RelatedTo"}, "start": {"label": "exercise", "language": "en"},
         "end": {"label": "gym", "language": "en"}, "weight": 2.0},
        {"rel": {"label": "Synonym"}, "start": {"label": "workout", "language": "en"},
         "end": {"label": "exercise", "language": "en"}, "weight": 1.5},
        {"rel": {"label": "RelatedTo"}, "start": {"label": "exercise", "language": "en"},
         "end": {"label": "Übung", "language": "de"}, "weight": 1.0}
    ]})
}

#[test]
fn remote_graph_persists_and_serves_offline() {
    let (url, hits) = mock(|target, _| conceptnet(target));
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("kg.tsv");
    let g = RemoteGraph::new(url, &snap, Duration::ZERO).unwrap();
    let edges = g.fetch_remote("exercise").unwrap();
    assert_eq!(edges.len(), 2, "non-English edge dropped");
    let related = g.related("Exercise", &RelationFilter::default()).unwrap();
    let terms: Vec<&str> = related.iter().map(|r| r.term.as_str()).collect();
    assert_eq!(terms, ["gym"], "Synonym is excluded by default");
    let all = g.related("exercise", &RelationFilter::none()).unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(g.requests(), 1);
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    let text = std::fs::read_to_string(&snap).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);

    // reopening against an unreachable endpoint answers from the snapshot
    let offline = RemoteGraph::new(dead_endpoint(), &snap, Duration::ZERO).unwrap();
    assert_eq!(offline.related("exercise", &RelationFilter::none()).unwrap().len(), 2);
    assert_eq!(offline.requests(), 0);
}

#[test]
fn remote_graph_network_down() {
    let dir = tempfile::tempdir().unwrap();
    let g = RemoteGraph::new(dead_endpoint(), dir.path().join("kg.tsv"), Duration::ZERO).unwrap();
    assert!(matches!(g.fetch_remote("walk"), Err(Error::NetworkFailure(_))));
    let err = g.related("walk", &RelationFilter::default()).unwrap_err();
    assert!(matches!(err, Error::KnowledgeGraphUnavailable(_)));
}

#[test]
fn remote_graph_rate_limits() {
    let (url, _) = mock(|_, _| json!({"edges": []}));
    let dir = tempfile::tempdir().unwrap();
    let g = RemoteGraph::new(url, dir.path().join("kg.tsv"), Duration::from_millis(150)).unwrap();
    let t = std::time::Instant::now();
    g.fetch_remote("a").unwrap();
    g.fetch_remote("b").unwrap();
    g.fetch_remote("a").unwrap();
    assert!(t.elapsed() >= Duration::from_millis(150));
    assert_eq!(g.requests(), 2);
}
