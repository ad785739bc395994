use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use vat_core::dataset::Direction;
use vat_core::ValueId;

use crate::ElicitError;

fn default_auth_env() -> String {
    "VAT_API_TOKEN".into()
}
fn default_timeout() -> f64 {
    60.0
}
fn default_concurrency() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_base() -> u64 {
    250
}
fn default_backoff_max() -> u64 {
    8_000
}

/// Chat-completion endpoint settings. The token itself never lives here;
/// only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_backoff_base")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_max")]
    pub backoff_max_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            auth_env: default_auth_env(),
            timeout_secs: default_timeout(),
            max_concurrent: default_concurrency(),
            max_retries: default_retries(),
            temperature: 0.0,
            backoff_base_ms: default_backoff_base(),
            backoff_max_ms: default_backoff_max(),
        }
    }

    pub fn validate(&self) -> Result<(), ElicitError> {
        let bad = |m: String| Err(ElicitError::Config(m));
        if reqwest::Url::parse(&self.base_url).is_err() {
            return bad(format!("base_url `{}` is not a URL", self.base_url));
        }
        if self.model_name.is_empty() {
            return bad("model_name is empty".into());
        }
        if self.max_concurrent == 0 {
            return bad("max_concurrent must be >= 1".into());
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad(format!("timeout_secs must be > 0, got {}", self.timeout_secs));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Token from the configured environment variable, if set and non-empty.
    pub fn token(&self) -> Option<Secret> {
        std::env::var(&self.auth_env).ok().filter(|t| !t.is_empty()).map(Secret)
    }
}

/// A credential that never prints.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(pub(crate) String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub scene: String,
    pub action: String,
    pub judgment: String,
}

/// Few-shot steering prefix. Exemplars are scene-action pairs with a worked
/// judgment; the first `shots` of them are used, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub target_value: ValueId,
    #[serde(default)]
    pub direction: Direction,
    pub shots: usize,
    #[serde(default)]
    pub exemplars: Vec<Exemplar>,
}

impl SteeringSpec {
    pub fn validate(&self) -> Result<(), ElicitError> {
        if ![0, 2, 4, 8].contains(&self.shots) {
            return Err(ElicitError::Steering(format!("shots must be one of 0, 2, 4, 8; got {}", self.shots)));
        }
        if self.exemplars.len() < self.shots {
            return Err(ElicitError::Steering(format!(
                "{} shots requested but only {} exemplars supplied",
                self.shots,
                self.exemplars.len()
            )));
        }
        Ok(())
    }
}
