mod common;

use std::sync::Arc;

use ideafeed_core::condition::Condition;
use ideafeed_core::Config;
use ideafeed_service::{api, app};
use serde_json::{json, Value};
use ureq::Agent;

struct Server {
    base: String,
    agent: Agent,
    _dir: tempfile::TempDir,
}

impl Server {
    fn start() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::load(&common::write_config(dir.path())).unwrap();
        let engine = Arc::new(app::engine(&cfg).unwrap());
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        listener.set_nonblocking(true).unwrap();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, api::router(engine)).await.unwrap();
            });
        });
        let agent = Agent::config_builder().http_status_as_error(false).build().into();
        Self { base, agent, _dir: dir }
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self.agent.post(format!("{}{path}", self.base)).send_json(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

fn expected(c: Condition) -> Vec<String> {
    let f = c.flags();
    let mut v = Vec::new();
    if f.show_scores {
        v.push("scores");
    }
    if f.show_attribution {
        v.extend(["score_kind", "highlights"]);
    }
    if f.show_contrastive {
        v.push("edits");
    }
    if f.show_counterfactual {
        v.push("suggestions");
    }
    let mut v: Vec<String> = v.into_iter().map(String::from).collect();
    v.sort();
    v
}

const DRAFTS: [&str; 3] = [
    "Walk to work twice a week",
    "Walk to work with a colleague twice a week",
    "Walk to work with a colleague twice a week and take the stairs",
];

#[test]
fn full_loop_for_every_condition() {
    let s = Server::start();
    for c in Condition::ALL {
        let (status, info) = s.post("/sessions", json!({"condition": c.as_str()}));
        assert_eq!(status, 201);
        let sid = info["session_id"].as_str().unwrap().to_string();
        let pid = info["first_prompt"]["id"].as_u64().unwrap();
        assert!(!info["first_prompt"]["phrase"].as_str().unwrap().is_empty());
        let mut last_id = String::new();
        for (i, text) in DRAFTS.iter().enumerate() {
            let it = i + 1;
            let (status, r) = s.post(
                &format!("/sessions/{sid}/ideations"),
                json!({"prompt_id": pid, "text": text, "iteration": it}),
            );
            assert_eq!(status, 200, "{r}");
            assert_eq!(keys(&r["payload"]), expected(c), "{c} iteration {it}");
            assert_eq!(r["finalized"], json!(it == 3));
            last_id = r["record"]["id"].as_str().unwrap().to_string();
        }
        let (status, fb) = s.get(&format!("/sessions/{sid}/ideations/{last_id}/feedback?score=quality"));
        assert_eq!(status, 200);
        assert_eq!(keys(&fb["payload"]), expected(c));
        if c.flags().show_attribution {
            assert_eq!(fb["payload"]["score_kind"], "quality");
        }
        let (status, fb) = s.get(&format!("/sessions/{sid}/ideations/{last_id}/feedback?compare=1"));
        if c.flags().show_contrastive {
            assert_eq!(status, 200);
            assert_eq!(fb["default_view"], "contrastive");
            assert!(!fb["payload"]["edits"].as_array().unwrap().is_empty());
        } else {
            assert_eq!(status, 422);
            assert_eq!(fb["error"], "compare_unavailable");
        }
    }
    let (status, h) = s.get("/health");
    assert_eq!(status, 200);
    assert_eq!(h["status"], "ok");
    for c in Condition::ALL {
        assert_eq!(h["corpus_versions"][c.as_str()], 2, "{c}");
    }
    assert_eq!(h["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn error_statuses() {
    let s = Server::start();
    let (status, e) = s.post("/sessions", json!({"condition": "SX"}));
    assert_eq!(status, 400);
    assert_eq!(e["error"], "invalid_condition");

    let (_, info) = s.post("/sessions", json!({"condition": "S"}));
    let sid = info["session_id"].as_str().unwrap();
    let pid = info["first_prompt"]["id"].as_u64().unwrap();
    let path = format!("/sessions/{sid}/ideations");
    let (status, e) = s.post(&path, json!({"prompt_id": pid, "text": "x", "iteration": 2}));
    assert_eq!(status, 409);
    assert_eq!(e["error"], "iteration_out_of_order");
    let (status, _) = s.post(&path, json!({"prompt_id": pid, "text": "y".repeat(2001), "iteration": 1}));
    assert_eq!(status, 413);
    let (status, _) = s.post("/sessions/s999999/ideations", json!({"prompt_id": pid, "text": "x", "iteration": 1}));
    assert_eq!(status, 404);
    let (status, _) = s.get(&format!("/sessions/{sid}/ideations/none/feedback"));
    assert_eq!(status, 404);
    let (status, _) = s.post(&path, json!({"prompt_id": pid, "text": "Go for a run", "iteration": 1}));
    assert_eq!(status, 200);
    let (status, e) = s.get(&format!("/sessions/{sid}/ideations/{sid}-p{pid}-i1/feedback?score=loudness"));
    assert_eq!(status, 400, "{e}");
}

#[test]
fn cors_headers() {
    let s = Server::start();
    let r = s.agent.get(format!("{}/health", s.base)).header("Origin", "http://localhost:5173").call().unwrap();
    assert_eq!(r.headers().get("access-control-allow-origin").unwrap(), "*");
    let r = s
        .agent
        .options(format!("{}/sessions", s.base))
        .header("Origin", "http://localhost:5173")
        .header("Access-Control-Request-Method", "POST")
        .header("Access-Control-Request-Headers", "content-type")
        .call()
        .unwrap();
    assert!(r.status().is_success());
    let methods = r.headers().get("access-control-allow-methods").unwrap().to_str().unwrap();
    assert!(methods.contains("POST"));
}
