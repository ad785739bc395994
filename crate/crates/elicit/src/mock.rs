//! Local chat-completion endpoint with deterministic answers.
//!
//! The answer to a prompt is derived from its SHA-256, so repeated runs see
//! identical replies. Failure injection: the first `fail_first` requests for
//! each distinct prompt get `fail_status`, prompts containing a garbage
//! marker get a reply with no rating in it, and `required_token` enforces a
//! bearer token.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub fail_first: u32,
    /// Status used for injected failures; 503 when unset.
    pub fail_status: Option<u16>,
    pub garbage_markers: Vec<String>,
    /// Same reply for every prompt instead of the hash-derived rating.
    pub fixed_reply: Option<String>,
    pub required_token: Option<String>,
    pub delay_ms: u64,
    /// Wrap ratings in a sentence rather than replying with the bare digit.
    pub prose: bool,
}

#[derive(Debug, Default)]
pub struct MockStats {
    pub requests: AtomicUsize,
    pub injected_failures: AtomicUsize,
    in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
}

impl MockStats {
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn injected_failures(&self) -> usize {
        self.injected_failures.load(Ordering::SeqCst)
    }
}

struct Shared {
    cfg: MockConfig,
    stats: Arc<MockStats>,
    seen: Mutex<HashMap<[u8; 32], u32>>,
}

/// Rating the mock gives to `prompt` (1..=5).
pub fn mock_rating(prompt: &str) -> u8 {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(head) % 5) as u8 + 1
}

struct InFlight<'a>(&'a MockStats);

impl<'a> InFlight<'a> {
    fn enter(stats: &'a MockStats) -> Self {
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(stats)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn complete(State(s): State<Arc<Shared>>, headers: HeaderMap, Json(req): Json<Value>) -> Response {
    s.stats.requests.fetch_add(1, Ordering::SeqCst);
    let _guard = InFlight::enter(&s.stats);
    if let Some(token) = &s.cfg.required_token {
        let ok = headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v == format!("Bearer {token}"));
        if !ok {
            return (StatusCode::UNAUTHORIZED, "bad token").into_response();
        }
    }
    let prompt = req["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_owned();
    if s.cfg.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(s.cfg.delay_ms)).await;
    }
    let key: [u8; 32] = Sha256::digest(prompt.as_bytes()).into();
    let failing = {
        let mut seen = s.seen.lock().expect("mock state lock");
        let n = seen.entry(key).or_insert(0);
        *n += 1;
        *n <= s.cfg.fail_first
    };
    if failing {
        s.stats.injected_failures.fetch_add(1, Ordering::SeqCst);
        let status = StatusCode::from_u16(s.cfg.fail_status.unwrap_or(503)).unwrap_or(StatusCode::SERVICE_UNAVAILABLE);
        return (status, "injected failure").into_response();
    }
    let content = if s.cfg.garbage_markers.iter().any(|m| prompt.contains(m.as_str())) {
        "I would rather not put a number on that.".to_owned()
    } else if let Some(fixed) = &s.cfg.fixed_reply {
        fixed.clone()
    } else if s.cfg.prose {
        format!("I would rate this a {} given the situation.", mock_rating(&prompt))
    } else {
        mock_rating(&prompt).to_string()
    };
    Json(json!({
        "id": "mock",
        "object": "chat.completion",
        "model": req["model"],
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    }))
    .into_response()
}

pub fn router(cfg: MockConfig, stats: Arc<MockStats>) -> Router {
    let shared = Arc::new(Shared {
        cfg,
        stats,
        seen: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/chat/completions", post(complete))
        .route("/v1/chat/completions", post(complete))
        .with_state(shared)
}

pub struct MockServer {
    addr: SocketAddr,
    stats: Arc<MockStats>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and serves in the background.
    pub async fn start(addr: SocketAddr, cfg: MockConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let stats = Arc::new(MockStats::default());
        let app = router(cfg, stats.clone());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    rx.await.ok();
                })
                .await
        });
        Ok(Self {
            addr,
            stats,
            shutdown: Some(tx),
            task,
        })
    }

    pub async fn start_local(cfg: MockConfig) -> std::io::Result<Self> {
        Self::start(SocketAddr::from(([127, 0, 0, 1], 0)), cfg).await
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL for [`crate::EndpointConfig::base_url`].
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn stats(&self) -> &MockStats {
        &self.stats
    }

    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            tx.send(()).ok();
        }
        (&mut self.task).await.unwrap_or(Ok(()))
    }

    /// Serves until the task is cancelled; used by the command-line server.
    pub async fn wait(mut self) -> std::io::Result<()> {
        (&mut self.task).await.unwrap_or(Ok(()))
    }
}
