use std::future::Future;

use serde::Deserialize;
use serde_json::json;

use crate::config::{EndpointConfig, Secret};
use crate::ElicitError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CallError {
    #[error("HTTP {0}: credentials rejected")]
    Auth(u16),
    #[error("HTTP {status}")]
    Status { status: u16, retryable: bool },
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Decode(String),
}

impl CallError {
    pub fn retryable(&self) -> bool {
        match self {
            Self::Status { retryable, .. } => *retryable,
            Self::Connect(_) | Self::Timeout | Self::Transport(_) => true,
            Self::Auth(_) | Self::Decode(_) => false,
        }
    }

    pub fn from_status(status: u16) -> Self {
        match status {
            401 | 403 => Self::Auth(status),
            429 | 500..=599 => Self::Status { status, retryable: true },
            _ => Self::Status {
                status,
                retryable: false,
            },
        }
    }
}

/// One prompt in, the assistant's text out.
pub trait ChatClient: Sync {
    fn complete(&self, prompt: &str) -> impl Future<Output = Result<String, CallError>> + Send;
}

/// Chat-completion client: POSTs `{model, messages, temperature}` to
/// `{base_url}/chat/completions` and returns `choices[0].message.content`.
#[derive(Debug, Clone)]
pub struct HttpClient {
    http: reqwest::Client,
    url: String,
    model: String,
    temperature: f64,
    token: Option<Secret>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl HttpClient {
    /// Reads the token from the environment variable named in the config.
    pub fn new(cfg: &EndpointConfig) -> Result<Self, ElicitError> {
        Self::with_token(cfg, cfg.token())
    }

    pub fn with_token(cfg: &EndpointConfig, token: Option<Secret>) -> Result<Self, ElicitError> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| ElicitError::Config(e.to_string()))?;
        Ok(Self {
            http,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
            token,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatClient for HttpClient {
    async fn complete(&self, prompt: &str) -> Result<String, CallError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.http.post(&self.url).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t.expose());
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                CallError::Timeout
            } else if e.is_connect() {
                CallError::Connect(e.to_string())
            } else {
                CallError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            return Err(CallError::from_status(status));
        }
        let completion: Completion = resp.json().await.map_err(|e| CallError::Decode(e.to_string()))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| CallError::Decode("no choices".into()))
    }
}
