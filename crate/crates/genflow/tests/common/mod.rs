#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use genflow::{router, AppState, Engine};
use genflow_core::config::Config;
use serde_json::Value;
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn config(lines: &[&str]) -> Config {
    let mut c = Config::default();
    for l in lines {
        let (k, v) = l.split_once('=').unwrap();
        c.set(k.trim(), v.trim()).unwrap();
    }
    c
}

pub fn exploring_config(site: &str) -> Config {
    let site = fixtures().join("sites").join(site);
    config(&["explore.enabled = true", &format!("explore.site = {}", site.display())])
}

pub struct Server {
    pub app: Router,
    pub state: AppState,
    pub dir: tempfile::TempDir,
}

impl Server {
    pub fn new(config: Config) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let engine = Arc::new(Engine::open(dir.path(), config).unwrap());
        let state = AppState::new(engine);
        Self {
            app: router(state.clone()),
            state,
            dir,
        }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn engine(&self) -> &Engine {
        &self.state.engine
    }

    pub async fn raw(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, String) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(v) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&v).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let ct = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
        (status, bytes, ct)
    }

    pub async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes, _) = self.raw(method, uri, body).await;
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, v)
    }

    /// Poll a job until it is done or failed, returning every state seen.
    pub async fn wait(&self, job: &str) -> (Value, Vec<String>) {
        let mut states = Vec::new();
        for _ in 0..1000 {
            let (status, v) = self.call("GET", &format!("/api/jobs/{job}"), None).await;
            assert_eq!(status, StatusCode::OK);
            let state = v["state"].as_str().unwrap().to_string();
            if states.last() != Some(&state) {
                states.push(state.clone());
            }
            if state == "done" || state == "failed" {
                return (v, states);
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job {job} did not finish");
    }
}

pub fn fixture_json(rel: &str) -> Value {
    serde_json::from_slice(&std::fs::read(fixtures().join(rel)).unwrap()).unwrap()
}

pub fn b64(bytes: &[u8]) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

const ORDER: [&str; 4] = ["queued", "running", "done", "failed"];

/// States observed by polling never move backwards.
pub fn monotone(states: &[String]) -> bool {
    let rank = |s: &String| ORDER.iter().position(|o| o == s).unwrap().min(2);
    states.windows(2).all(|w| rank(&w[0]) <= rank(&w[1]))
}
