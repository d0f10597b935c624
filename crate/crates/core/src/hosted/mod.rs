//! Client for a hosted fine-tuning provider, plus a scripted mock of it.
//!
//! The wire protocol follows the common hosted fine-tuning REST shape, relative
//! to the endpoint base URL (default `https://api.openai.com/v1`):
//!
//! | operation        | request                                   | response            |
//! |------------------|-------------------------------------------|---------------------|
//! | upload file      | `POST /files` multipart `purpose`, `file` | file object         |
//! | create job       | `POST /fine_tuning/jobs` JSON             | job object          |
//! | retrieve job     | `GET /fine_tuning/jobs/{id}`              | job object          |
//! | chat completion  | `POST /chat/completions` JSON             | completion object   |
//!
//! Errors use `{"error": {"message", "type", "code"}}` with a 4xx/5xx status.
//! Requests carry `Authorization: Bearer <credential>`.

mod client;
mod mock;
mod server;
mod transport;
pub mod wire;

use std::fmt;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::ChatFormatError;

pub use client::{HostedClient, PollOutcome};
pub use mock::{CompletionScript, FailureRule, JobScript, MockEndpoint, MockProvider, MockScript, MockStats};
pub use server::MockServer;
pub use transport::{HttpRequest, HttpResponse, HttpTransport, Method, RetryPolicy, Transport, TransportError};

pub const ENV_API_KEY: &str = "DEPSCREEN_API_KEY";
pub const ENV_API_BASE: &str = "DEPSCREEN_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_BASE_MODEL: &str = "gpt-3.5-turbo-1106";

/// Hosted fine-tuning hyperparameters. The learning-rate multiplier is passed
/// to the provider as-is; nothing local ever scales by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostedHyperparams {
    pub n_epochs: u32,
    pub batch_size: u32,
    pub learning_rate_multiplier: f64,
}

impl Default for HostedHyperparams {
    fn default() -> Self {
        HostedHyperparams { n_epochs: 4, batch_size: 4, learning_rate_multiplier: 1.57 }
    }
}

impl HostedHyperparams {
    pub fn validate(&self) -> Result<(), HostedError> {
        if self.n_epochs == 0 {
            return Err(HostedError::Validation("n_epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(HostedError::Validation("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate_multiplier.is_finite() && self.learning_rate_multiplier > 0.0) {
            return Err(HostedError::Validation(format!(
                "learning_rate_multiplier must be positive, got {}",
                self.learning_rate_multiplier
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
    Cancelled,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Succeeded | JobStatus::Failed | JobStatus::Cancelled)
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JobStatus::Queued => "QUEUED",
            JobStatus::Running => "RUNNING",
            JobStatus::Succeeded => "SUCCEEDED",
            JobStatus::Failed => "FAILED",
            JobStatus::Cancelled => "CANCELLED",
        };
        f.write_str(s)
    }
}

/// Allowed lifecycle moves: QUEUED→RUNNING, QUEUED→CANCELLED,
/// RUNNING→{SUCCEEDED, FAILED, CANCELLED}, and self-loops on non-terminal
/// states. Terminal states are absorbing.
pub fn job_transition_valid(from: JobStatus, to: JobStatus) -> bool {
    use JobStatus::*;
    matches!(
        (from, to),
        (Queued, Queued)
            | (Running, Running)
            | (Queued, Running)
            | (Queued, Cancelled)
            | (Running, Succeeded)
            | (Running, Failed)
            | (Running, Cancelled)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneJob {
    pub job_id: String,
    pub status: JobStatus,
    pub base_model: String,
    pub training_file_id: String,
    pub hyperparams: HostedHyperparams,
    pub fine_tuned_model_id: Option<String>,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FineTuneJob {
    /// Model id present iff SUCCEEDED; finish time present iff terminal.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.fine_tuned_model_id.is_some() != (self.status == JobStatus::Succeeded) {
            return Err(format!(
                "job {} is {} but fine_tuned_model is {:?}",
                self.job_id, self.status, self.fine_tuned_model_id
            ));
        }
        if self.finished_at.is_some() != self.status.is_terminal() {
            return Err(format!(
                "job {} is {} but finished_at is {:?}",
                self.job_id, self.status, self.finished_at
            ));
        }
        Ok(())
    }
}

/// A secret that never shows up in `Debug` output or serialised data.
#[derive(Clone, PartialEq, Eq)]
pub struct Credential(String);

impl Credential {
    pub fn new(secret: impl Into<String>) -> Self {
        Credential(secret.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credential(***)")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProviderEndpoint {
    pub base_url: String,
    #[serde(skip)]
    pub credential: Credential,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    pub max_retries: u32,
}

mod duration_ms {
    use std::time::Duration;

    use serde::Serializer;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>, credential: Credential) -> Self {
        ProviderEndpoint {
            base_url: base_url.into(),
            credential,
            timeout: Duration::from_secs(60),
            max_retries: 3,
        }
    }

    /// Credential from `DEPSCREEN_API_KEY`, base URL from `DEPSCREEN_API_BASE`
    /// (or the default).
    pub fn from_env() -> Result<Self, HostedError> {
        let key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| HostedError::Validation(format!("{ENV_API_KEY} is not set")))?;
        let base = std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Ok(ProviderEndpoint::new(base, Credential::new(key)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HostedError {
    /// Local input problem; nothing was sent.
    #[error("{0}")]
    Validation(String),
    #[error("training file {path}: {source}")]
    TrainingFile { path: String, source: ChatFormatError },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("unexpected provider response: {0}")]
    Protocol(String),
}

impl HostedError {
    /// Whether the failure happened on the provider side (or in between).
    pub fn is_remote(&self) -> bool {
        matches!(self, HostedError::Transport { .. } | HostedError::Provider { .. } | HostedError::Protocol(_))
    }
}
