//! Scripted in-process stand-in for the hosted provider.
//!
//! All state lives on one worker thread; requests are applied strictly in the
//! order they arrive on its command channel.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::mpsc::{self, Sender};
use std::thread;

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::transport::{HttpRequest, HttpResponse, Method, Transport, TransportError};
use super::wire::{self, ChatCompletionRequest, ChatCompletionResponse, ChatChoice, CreateJobRequest, FileObject, JobObject};
use super::{job_transition_valid, FineTuneJob, HostedError, JobStatus};
use crate::corpus::{validate_chat_jsonl, ChatMessage, Role};

/// Lifecycle a created job walks through, one step per retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobScript {
    pub transitions: Vec<JobStatus>,
    #[serde(default)]
    pub fine_tuned_model: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
    /// Reject job creation with this provider message.
    #[serde(default)]
    pub reject: Option<String>,
}

impl Default for JobScript {
    fn default() -> Self {
        JobScript {
            transitions: vec![JobStatus::Queued, JobStatus::Running, JobStatus::Succeeded],
            fine_tuned_model: None,
            error: None,
            reject: None,
        }
    }
}

impl JobScript {
    pub fn succeeding() -> Self {
        Self::default()
    }

    pub fn failing(message: &str) -> Self {
        JobScript {
            transitions: vec![JobStatus::Queued, JobStatus::Running, JobStatus::Failed],
            error: Some(message.to_string()),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self.transitions.first() {
            Some(JobStatus::Queued) => {}
            other => return Err(format!("job script must start QUEUED, starts {other:?}")),
        }
        for w in self.transitions.windows(2) {
            if !job_transition_valid(w[0], w[1]) {
                return Err(format!("job script has invalid transition {} -> {}", w[0], w[1]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockEndpoint {
    Upload,
    CreateJob,
    GetJob,
    Chat,
}

/// Inject failures on one endpoint: a status code (e.g. 503) or a dropped
/// connection, for the first `times` requests (forever if absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureRule {
    pub endpoint: MockEndpoint,
    #[serde(default)]
    pub status: Option<u16>,
    #[serde(default)]
    pub disconnect: bool,
    #[serde(default)]
    pub times: Option<u32>,
}

/// Canned chat-completion answers, keyed by the user message content.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionScript {
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub by_content: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    /// When set, requests must authenticate with this key.
    #[serde(default)]
    pub api_key: Option<String>,
    /// Scripts for jobs in creation order; the last one repeats.
    #[serde(default)]
    pub jobs: Vec<JobScript>,
    #[serde(default)]
    pub failures: Vec<FailureRule>,
    #[serde(default)]
    pub completions: CompletionScript,
}

impl MockScript {
    pub fn validate(&self) -> Result<(), HostedError> {
        for (i, j) in self.jobs.iter().enumerate() {
            j.validate().map_err(|e| HostedError::Validation(format!("mock script job {i}: {e}")))?;
        }
        for f in &self.failures {
            if f.status.is_none() && !f.disconnect {
                return Err(HostedError::Validation("failure rule needs a status or disconnect".into()));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HostedError> {
        let src = fs::read_to_string(path).map_err(|source| HostedError::Io { path: path.display().to_string(), source })?;
        let script: MockScript = serde_json::from_str(&src)
            .map_err(|e| HostedError::Validation(format!("{}: {e}", path.display())))?;
        script.validate()?;
        Ok(script)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockStats {
    pub requests: BTreeMap<MockEndpoint, u32>,
    pub files: usize,
    pub jobs: usize,
}

enum Command {
    Request(HttpRequest, Sender<Result<HttpResponse, TransportError>>),
    Stats(Sender<MockStats>),
    History(String, Sender<Vec<FineTuneJob>>),
}

/// Handle to the mock worker. Cheap to clone; all clones share one state.
#[derive(Clone)]
pub struct MockProvider {
    tx: Sender<Command>,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MockProvider")
    }
}

impl MockProvider {
    pub fn new(script: MockScript) -> Result<Self, HostedError> {
        script.validate()?;
        let (tx, rx) = mpsc::channel::<Command>();
        thread::Builder::new()
            .name("mock-provider".into())
            .spawn(move || {
                let mut state = State::new(script);
                for cmd in rx {
                    match cmd {
                        Command::Request(req, reply) => {
                            let _ = reply.send(state.handle(&req));
                        }
                        Command::Stats(reply) => {
                            let _ = reply.send(state.stats());
                        }
                        Command::History(id, reply) => {
                            let _ = reply.send(state.history.get(&id).cloned().unwrap_or_default());
                        }
                    }
                }
            })
            .expect("spawn mock provider thread");
        Ok(MockProvider { tx })
    }

    pub fn stats(&self) -> MockStats {
        let (tx, rx) = mpsc::channel();
        self.tx.send(Command::Stats(tx)).expect("mock provider alive");
        rx.recv().expect("mock provider alive")
    }

    /// Every snapshot of `job_id` served so far, in order (creation included).
    pub fn job_history(&self, job_id: &str) -> Vec<FineTuneJob> {
        let (tx, rx) = mpsc::channel();
        self.tx.send(Command::History(job_id.to_string(), tx)).expect("mock provider alive");
        rx.recv().expect("mock provider alive")
    }
}

impl Transport for MockProvider {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let (tx, rx) = mpsc::channel();
        self.tx
            .send(Command::Request(req.clone(), tx))
            .map_err(|_| TransportError("mock provider stopped".into()))?;
        rx.recv().map_err(|_| TransportError("mock provider stopped".into()))?
    }
}

struct JobState {
    job: FineTuneJob,
    script: JobScript,
    step: usize,
}

struct State {
    script: MockScript,
    files: BTreeSet<String>,
    jobs: BTreeMap<String, JobState>,
    history: HashMap<String, Vec<FineTuneJob>>,
    requests: BTreeMap<MockEndpoint, u32>,
    failures_used: Vec<u32>,
}

const EPOCH_BASE: i64 = 1_700_000_000;

fn error(status: u16, kind: &str, code: Option<&str>, message: impl Into<String>) -> HttpResponse {
    HttpResponse::json(
        status,
        &json!({ "error": { "message": message.into(), "type": kind, "code": code } }),
    )
}

impl State {
    fn new(script: MockScript) -> Self {
        let n = script.failures.len();
        State {
            script,
            files: BTreeSet::new(),
            jobs: BTreeMap::new(),
            history: HashMap::new(),
            requests: BTreeMap::new(),
            failures_used: vec![0; n],
        }
    }

    fn stats(&self) -> MockStats {
        MockStats { requests: self.requests.clone(), files: self.files.len(), jobs: self.jobs.len() }
    }

    fn route(req: &HttpRequest) -> Option<(MockEndpoint, Option<String>)> {
        let path = req.path.split('?').next().unwrap_or("");
        let path = path.strip_prefix("/v1").unwrap_or(path);
        match (req.method, path) {
            (Method::Post, wire::PATH_FILES) => Some((MockEndpoint::Upload, None)),
            (Method::Post, wire::PATH_JOBS) => Some((MockEndpoint::CreateJob, None)),
            (Method::Post, wire::PATH_CHAT) => Some((MockEndpoint::Chat, None)),
            (Method::Get, p) => p
                .strip_prefix(wire::PATH_JOBS)
                .and_then(|rest| rest.strip_prefix('/'))
                .filter(|id| !id.is_empty() && !id.contains('/'))
                .map(|id| (MockEndpoint::GetJob, Some(id.to_string()))),
            _ => None,
        }
    }

    fn injected_failure(&mut self, endpoint: MockEndpoint) -> Option<Result<HttpResponse, TransportError>> {
        for (i, rule) in self.script.failures.iter().enumerate() {
            if rule.endpoint != endpoint {
                continue;
            }
            if rule.times.is_some_and(|t| self.failures_used[i] >= t) {
                continue;
            }
            self.failures_used[i] += 1;
            return Some(if rule.disconnect {
                Err(TransportError("mock: connection dropped".into()))
            } else {
                let status = rule.status.unwrap_or(503);
                Ok(error(status, "server_error", None, "injected failure"))
            });
        }
        None
    }

    fn handle(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let Some((endpoint, id)) = Self::route(req) else {
            return Ok(error(404, "invalid_request_error", None, format!("no route for {} {}", req.method, req.path)));
        };
        *self.requests.entry(endpoint).or_default() += 1;
        if let Some(key) = &self.script.api_key {
            let expected = format!("Bearer {key}");
            if req.header_value("authorization") != Some(expected.as_str()) {
                return Ok(error(401, "invalid_request_error", Some("invalid_api_key"), "invalid credential"));
            }
        }
        if let Some(f) = self.injected_failure(endpoint) {
            return f;
        }
        Ok(match endpoint {
            MockEndpoint::Upload => self.upload(req),
            MockEndpoint::CreateJob => self.create_job(req),
            MockEndpoint::GetJob => self.get_job(id.as_deref().unwrap_or_default()),
            MockEndpoint::Chat => self.chat(req),
        })
    }

    fn upload(&mut self, req: &HttpRequest) -> HttpResponse {
        let ct = req.header_value("content-type").unwrap_or_default();
        let parts = match wire::decode_multipart(ct, &req.body) {
            Ok(p) => p,
            Err(e) => return error(400, "invalid_request_error", None, e),
        };
        let purpose = parts.iter().find(|p| p.name == "purpose").map(|p| String::from_utf8_lossy(&p.data).into_owned());
        if purpose.as_deref() != Some(wire::FILE_PURPOSE) {
            return error(400, "invalid_request_error", None, "purpose must be fine-tune");
        }
        let Some(file) = parts.into_iter().find(|p| p.name == "file") else {
            return error(400, "invalid_request_error", None, "missing file part");
        };
        let text = String::from_utf8_lossy(&file.data);
        if let Err(e) = validate_chat_jsonl(&text) {
            return error(400, "invalid_request_error", Some("invalid_file_format"), e.to_string());
        }
        let id = format!("file-{:04}", self.files.len() + 1);
        let bytes = file.data.len() as u64;
        self.files.insert(id.clone());
        let obj = FileObject {
            id,
            object: "file".into(),
            bytes,
            filename: file.filename.unwrap_or_else(|| "upload.jsonl".into()),
            purpose: wire::FILE_PURPOSE.into(),
            created_at: EPOCH_BASE,
        };
        HttpResponse::json(200, &serde_json::to_value(obj).unwrap())
    }

    fn create_job(&mut self, req: &HttpRequest) -> HttpResponse {
        let body: CreateJobRequest = match serde_json::from_slice(&req.body) {
            Ok(b) => b,
            Err(e) => return error(400, "invalid_request_error", None, format!("invalid body: {e}")),
        };
        if !self.files.contains(&body.training_file) {
            return error(
                404,
                "invalid_request_error",
                Some("file_not_found"),
                format!("No such File object: {}", body.training_file),
            );
        }
        if let Err(e) = body.hyperparameters.validate() {
            return error(400, "invalid_request_error", None, e.to_string());
        }
        let n = self.jobs.len();
        let script = self
            .script
            .jobs
            .get(n)
            .or(self.script.jobs.last())
            .cloned()
            .unwrap_or_default();
        if let Some(msg) = &script.reject {
            return error(400, "invalid_request_error", Some("job_rejected"), msg.clone());
        }
        let job_id = format!("ftjob-{:04}", n + 1);
        let job = FineTuneJob {
            job_id: job_id.clone(),
            status: script.transitions[0],
            base_model: body.model,
            training_file_id: body.training_file,
            hyperparams: body.hyperparameters,
            fine_tuned_model_id: None,
            created_at: Utc.timestamp_opt(EPOCH_BASE + 60 * (n as i64 + 1), 0).unwrap(),
            finished_at: None,
            error: None,
        };
        self.history.entry(job_id.clone()).or_default().push(job.clone());
        let resp = HttpResponse::json(200, &serde_json::to_value(JobObject::from_job(&job)).unwrap());
        self.jobs.insert(job_id, JobState { job, script, step: 0 });
        resp
    }

    fn get_job(&mut self, id: &str) -> HttpResponse {
        let Some(state) = self.jobs.get_mut(id) else {
            return error(404, "invalid_request_error", Some("job_not_found"), format!("No such job: {id}"));
        };
        if !state.job.status.is_terminal() {
            state.step = (state.step + 1).min(state.script.transitions.len() - 1);
            let status = state.script.transitions[state.step];
            state.job.status = status;
            if status.is_terminal() {
                state.job.finished_at = Some(state.job.created_at + chrono::Duration::seconds(60 * state.step as i64));
            }
            match status {
                JobStatus::Succeeded => {
                    state.job.fine_tuned_model_id = Some(state.script.fine_tuned_model.clone().unwrap_or_else(|| {
                        format!("ft:{}:depscreen::{}", state.job.base_model, state.job.job_id)
                    }));
                }
                JobStatus::Failed => {
                    state.job.error = Some(state.script.error.clone().unwrap_or_else(|| "training failed".into()));
                }
                _ => {}
            }
        }
        self.history.entry(id.to_string()).or_default().push(state.job.clone());
        HttpResponse::json(200, &serde_json::to_value(JobObject::from_job(&state.job)).unwrap())
    }

    fn chat(&mut self, req: &HttpRequest) -> HttpResponse {
        let body: ChatCompletionRequest = match serde_json::from_slice(&req.body) {
            Ok(b) => b,
            Err(e) => return error(400, "invalid_request_error", None, format!("invalid body: {e}")),
        };
        let user = body.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("");
        let content = self
            .script
            .completions
            .by_content
            .get(user)
            .or(self.script.completions.default.as_ref())
            .cloned()
            .unwrap_or_else(|| "I cannot determine this.".into());
        let resp = ChatCompletionResponse {
            id: format!("chatcmpl-{:06}", self.requests.get(&MockEndpoint::Chat).copied().unwrap_or(0)),
            object: "chat.completion".into(),
            model: body.model,
            choices: vec![ChatChoice { index: 0, message: ChatMessage::new(Role::Assistant, content), finish_reason: Some("stop".into()) }],
        };
        HttpResponse::json(200, &serde_json::to_value(resp).unwrap())
    }
}
