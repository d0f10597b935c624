use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;

use super::transport::{HttpRequest, HttpResponse, HttpTransport, Method, RetryPolicy, Transport};
use super::wire::{self, ChatCompletionRequest, ChatCompletionResponse, CreateJobRequest, ErrorBody, FileObject, JobObject, Part};
use super::{FineTuneJob, HostedError, HostedHyperparams, JobStatus, ProviderEndpoint};
use crate::corpus::{validate_chat_jsonl, ChatMessage};

/// Result of [`HostedClient::poll_job`]: the last snapshot seen and whether
/// the deadline passed before it became terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct PollOutcome {
    pub job: FineTuneJob,
    pub timed_out: bool,
    pub polls: u32,
}

/// Hosted fine-tuning client. Immutable after construction; clone or share
/// behind `&` across threads.
#[derive(Clone)]
pub struct HostedClient {
    endpoint: ProviderEndpoint,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HostedClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HostedClient")
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl HostedClient {
    /// Client talking HTTP to `endpoint.base_url`.
    pub fn new(endpoint: ProviderEndpoint) -> Self {
        let transport = Arc::new(HttpTransport::new(endpoint.base_url.clone(), endpoint.timeout));
        Self::with_transport(endpoint, transport)
    }

    pub fn with_transport(endpoint: ProviderEndpoint, transport: Arc<dyn Transport>) -> Self {
        let retry = RetryPolicy { max_retries: endpoint.max_retries, ..RetryPolicy::default() };
        HostedClient { endpoint, transport, retry }
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    fn authorized(&self, req: HttpRequest) -> HttpRequest {
        req.header("Authorization", format!("Bearer {}", self.endpoint.credential.expose()))
    }

    fn call<T: DeserializeOwned>(&self, req: HttpRequest) -> Result<T, HostedError> {
        let req = self.authorized(req);
        let (outcome, attempts) = self.retry.send(self.transport.as_ref(), &req);
        let resp = outcome.map_err(|e| HostedError::Transport { attempts, message: e.0 })?;
        decode(resp)
    }

    /// Validate the chat-format file locally, then upload it. Schema problems
    /// are reported with their line number before any request is made.
    pub fn upload_training_file(&self, path: &Path) -> Result<String, HostedError> {
        let bytes = fs::read(path).map_err(|source| HostedError::Io { path: path.display().to_string(), source })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| HostedError::Validation(format!("{} is not UTF-8: {e}", path.display())))?;
        validate_chat_jsonl(text)
            .map_err(|source| HostedError::TrainingFile { path: path.display().to_string(), source })?;
        let filename = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| "train.jsonl".into());
        let body = wire::encode_multipart(&[
            Part { name: "purpose".into(), filename: None, data: wire::FILE_PURPOSE.as_bytes().to_vec() },
            Part { name: "file".into(), filename: Some(filename), data: bytes },
        ]);
        let req = HttpRequest::new(Method::Post, wire::PATH_FILES)
            .header("Content-Type", wire::multipart_content_type())
            .body(body);
        let file: FileObject = self.call(req)?;
        Ok(file.id)
    }

    /// Create a fine-tuning job. The provider must echo `hp` exactly.
    pub fn create_job(&self, file_id: &str, hp: &HostedHyperparams, base_model: &str) -> Result<FineTuneJob, HostedError> {
        hp.validate()?;
        if file_id.trim().is_empty() {
            return Err(HostedError::Validation("file id is empty".into()));
        }
        let body = CreateJobRequest {
            model: base_model.to_string(),
            training_file: file_id.to_string(),
            hyperparameters: *hp,
        };
        let req = HttpRequest::new(Method::Post, wire::PATH_JOBS)
            .header("Content-Type", "application/json")
            .body(serde_json::to_vec(&body).expect("request serializes"));
        let job = self.decode_job(self.call(req)?)?;
        if job.hyperparams != *hp {
            return Err(HostedError::Protocol(format!(
                "provider echoed hyperparameters {:?}, requested {:?}",
                job.hyperparams, hp
            )));
        }
        if job.status != JobStatus::Queued {
            log::warn!("new job {} reported status {}", job.job_id, job.status);
        }
        Ok(job)
    }

    pub fn get_job(&self, job_id: &str) -> Result<FineTuneJob, HostedError> {
        let req = HttpRequest::new(Method::Get, format!("{}/{}", wire::PATH_JOBS, job_id));
        self.decode_job(self.call(req)?)
    }

    fn decode_job(&self, obj: JobObject) -> Result<FineTuneJob, HostedError> {
        let job = obj.into_job().map_err(HostedError::Protocol)?;
        job.check_invariants().map_err(HostedError::Protocol)?;
        Ok(job)
    }

    /// Poll until the job is terminal or `deadline` has elapsed. The job is
    /// always fetched at least once, so a zero deadline returns the current
    /// snapshot marked as timed out (unless it is already terminal).
    pub fn poll_job(&self, job_id: &str, interval: Duration, deadline: Duration) -> Result<PollOutcome, HostedError> {
        let start = Instant::now();
        let mut polls = 0;
        let mut previous: Option<JobStatus> = None;
        loop {
            let job = self.get_job(job_id)?;
            polls += 1;
            if let Some(prev) = previous {
                if prev != job.status && !super::job_transition_valid(prev, job.status) {
                    log::warn!("job {job_id}: observed {prev} -> {}", job.status);
                }
            }
            previous = Some(job.status);
            if job.status.is_terminal() {
                return Ok(PollOutcome { job, timed_out: false, polls });
            }
            let elapsed = start.elapsed();
            if elapsed >= deadline {
                return Ok(PollOutcome { job, timed_out: true, polls });
            }
            std::thread::sleep(interval.min(deadline - elapsed));
        }
    }

    /// One chat completion; returns the first choice's content.
    pub fn chat_completion(&self, model: &str, messages: &[ChatMessage]) -> Result<String, HostedError> {
        let body = ChatCompletionRequest { model: model.to_string(), messages: messages.to_vec(), temperature: 0.0 };
        let req = HttpRequest::new(Method::Post, wire::PATH_CHAT)
            .header("Content-Type", "application/json")
            .body(serde_json::to_vec(&body).expect("request serializes"));
        let resp: ChatCompletionResponse = self.call(req)?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| HostedError::Protocol("completion has no choices".into()))
    }
}

fn decode<T: DeserializeOwned>(resp: HttpResponse) -> Result<T, HostedError> {
    if !resp.is_success() {
        let message = serde_json::from_slice::<ErrorBody>(&resp.body)
            .map(|b| b.error.message)
            .unwrap_or_else(|_| String::from_utf8_lossy(&resp.body).into_owned());
        return Err(HostedError::Provider { status: resp.status, message });
    }
    serde_json::from_slice(&resp.body).map_err(|e| HostedError::Protocol(e.to_string()))
}
