//! Judgment collection from chat-completion endpoints.
//!
//! [`probe`] builds Likert prompts (optionally behind a few-shot steering
//! prefix) and parses answers, [`client`] speaks the chat-completion wire
//! protocol, [`runner`] drives a dataset through a client with bounded
//! concurrency, retries and a resumable checkpoint, and [`mock`] is a local
//! deterministic endpoint for tests and dry runs.

pub mod client;
pub mod config;
pub mod mock;
pub mod probe;
pub mod runner;

pub use client::{CallError, ChatClient, HttpClient};
pub use config::{EndpointConfig, Exemplar, SteeringSpec};
pub use mock::{MockConfig, MockServer};
pub use probe::{build_probe, parse_likert, Prompt};
pub use runner::{run_elicitation, ElicitItem, ElicitOutcome, RunOptions};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElicitError {
    #[error("invalid endpoint config: {0}")]
    Config(String),
    #[error("steering: {0}")]
    Steering(String),
    #[error("probe: {0} text is empty")]
    EmptyText(&'static str),
    #[error("authentication rejected by endpoint (HTTP {status})")]
    Auth { status: u16 },
    #[error("endpoint {url} unreachable after {attempts} attempt(s): {message}")]
    Unreachable { url: String, attempts: u32, message: String },
    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error(transparent)]
    Taxonomy(#[from] vat_core::taxonomy::TaxonomyError),
}

impl ElicitError {
    /// Failures caused by the remote service rather than local input.
    pub fn is_upstream(&self) -> bool {
        matches!(self, Self::Auth { .. } | Self::Unreachable { .. })
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Steering(_) => "steering",
            Self::EmptyText(_) => "empty_text",
            Self::Auth { .. } => "auth",
            Self::Unreachable { .. } => "unreachable",
            Self::Checkpoint { .. } => "checkpoint",
            Self::Io { .. } => "io",
            Self::Dataset { .. } => "dataset",
            Self::Taxonomy(_) => "taxonomy",
        }
    }
}
