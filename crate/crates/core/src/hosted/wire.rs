//! JSON bodies and multipart encoding shared by the client and the mock.

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{FineTuneJob, HostedHyperparams, JobStatus};
use crate::corpus::ChatMessage;

pub const PATH_FILES: &str = "/files";
pub const PATH_JOBS: &str = "/fine_tuning/jobs";
pub const PATH_CHAT: &str = "/chat/completions";
pub const FILE_PURPOSE: &str = "fine-tune";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileObject {
    pub id: String,
    pub object: String,
    pub bytes: u64,
    pub filename: String,
    pub purpose: String,
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateJobRequest {
    pub model: String,
    pub training_file: String,
    pub hyperparameters: HostedHyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobErrorObject {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobObject {
    pub id: String,
    pub object: String,
    pub model: String,
    pub status: String,
    pub training_file: String,
    pub hyperparameters: HostedHyperparams,
    pub fine_tuned_model: Option<String>,
    pub created_at: i64,
    pub finished_at: Option<i64>,
    #[serde(default)]
    pub error: Option<JobErrorObject>,
}

pub fn status_to_wire(s: JobStatus) -> &'static str {
    match s {
        JobStatus::Queued => "queued",
        JobStatus::Running => "running",
        JobStatus::Succeeded => "succeeded",
        JobStatus::Failed => "failed",
        JobStatus::Cancelled => "cancelled",
    }
}

pub fn status_from_wire(s: &str) -> Option<JobStatus> {
    Some(match s {
        "validating_files" | "queued" | "pending" => JobStatus::Queued,
        "running" => JobStatus::Running,
        "succeeded" => JobStatus::Succeeded,
        "failed" => JobStatus::Failed,
        "cancelled" => JobStatus::Cancelled,
        _ => return None,
    })
}

fn ts(secs: i64) -> Result<DateTime<Utc>, String> {
    Utc.timestamp_opt(secs, 0).single().ok_or_else(|| format!("invalid timestamp {secs}"))
}

impl JobObject {
    pub fn from_job(job: &FineTuneJob) -> Self {
        JobObject {
            id: job.job_id.clone(),
            object: "fine_tuning.job".into(),
            model: job.base_model.clone(),
            status: status_to_wire(job.status).into(),
            training_file: job.training_file_id.clone(),
            hyperparameters: job.hyperparams,
            fine_tuned_model: job.fine_tuned_model_id.clone(),
            created_at: job.created_at.timestamp(),
            finished_at: job.finished_at.map(|t| t.timestamp()),
            error: job.error.clone().map(|message| JobErrorObject { message }),
        }
    }

    pub fn into_job(self) -> Result<FineTuneJob, String> {
        let status = status_from_wire(&self.status).ok_or_else(|| format!("unknown job status {:?}", self.status))?;
        Ok(FineTuneJob {
            job_id: self.id,
            status,
            base_model: self.model,
            training_file_id: self.training_file,
            hyperparams: self.hyperparameters,
            fine_tuned_model_id: self.fine_tuned_model,
            created_at: ts(self.created_at)?,
            finished_at: self.finished_at.map(ts).transpose()?,
            error: self.error.map(|e| e.message),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub message: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatCompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChoice {
    pub index: u32,
    pub message: ChatMessage,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatCompletionResponse {
    pub id: String,
    pub object: String,
    pub model: String,
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub name: String,
    pub filename: Option<String>,
    pub data: Vec<u8>,
}

pub const MULTIPART_BOUNDARY: &str = "depscreen-form-boundary-7e1f4c";

/// `multipart/form-data` body for `parts` with the fixed boundary.
pub fn encode_multipart(parts: &[Part]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in parts {
        out.extend_from_slice(format!("--{MULTIPART_BOUNDARY}\r\n").as_bytes());
        match &p.filename {
            Some(f) => out.extend_from_slice(
                format!(
                    "Content-Disposition: form-data; name=\"{}\"; filename=\"{}\"\r\nContent-Type: application/jsonl\r\n\r\n",
                    p.name, f
                )
                .as_bytes(),
            ),
            None => out.extend_from_slice(format!("Content-Disposition: form-data; name=\"{}\"\r\n\r\n", p.name).as_bytes()),
        }
        out.extend_from_slice(&p.data);
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(format!("--{MULTIPART_BOUNDARY}--\r\n").as_bytes());
    out
}

pub fn multipart_content_type() -> String {
    format!("multipart/form-data; boundary={MULTIPART_BOUNDARY}")
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if needle.is_empty() || hay.len() < needle.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| &hay[i..i + needle.len()] == needle)
}

fn disposition_param(header: &str, key: &str) -> Option<String> {
    let pat = format!("{key}=\"");
    let start = header.find(&pat)? + pat.len();
    let end = header[start..].find('"')? + start;
    Some(header[start..end].to_string())
}

/// Parse a `multipart/form-data` body given its `Content-Type` header.
pub fn decode_multipart(content_type: &str, body: &[u8]) -> Result<Vec<Part>, String> {
    let boundary = content_type
        .split(';')
        .find_map(|p| p.trim().strip_prefix("boundary="))
        .map(|b| b.trim_matches('"').to_string())
        .ok_or("missing multipart boundary")?;
    let delim = format!("--{boundary}").into_bytes();
    let mut parts = Vec::new();
    let mut pos = find(body, &delim, 0).ok_or("no multipart delimiter")? + delim.len();
    loop {
        if body[pos..].starts_with(b"--") {
            return Ok(parts);
        }
        if !body[pos..].starts_with(b"\r\n") {
            return Err("malformed multipart delimiter line".into());
        }
        pos += 2;
        let header_end = find(body, b"\r\n\r\n", pos).ok_or("unterminated part headers")?;
        let headers = String::from_utf8_lossy(&body[pos..header_end]).to_string();
        let data_start = header_end + 4;
        let mut next_delim = delim.clone();
        next_delim.splice(0..0, b"\r\n".iter().copied());
        let data_end = find(body, &next_delim, data_start).ok_or("unterminated part body")?;
        let disposition = headers
            .lines()
            .find(|l| l.to_ascii_lowercase().starts_with("content-disposition"))
            .ok_or("part without Content-Disposition")?;
        parts.push(Part {
            name: disposition_param(disposition, "name").ok_or("part without name")?,
            filename: disposition_param(disposition, "filename"),
            data: body[data_start..data_end].to_vec(),
        });
        pos = data_end + next_delim.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn job_object_round_trip() {
        let wire = r#"{"id":"ftjob-1","object":"fine_tuning.job","model":"gpt-3.5-turbo-1106","status":"validating_files",
            "training_file":"file-1","hyperparameters":{"n_epochs":4,"batch_size":4,"learning_rate_multiplier":1.57},
            "fine_tuned_model":null,"created_at":1700000000,"finished_at":null}"#;
        let job = serde_json::from_str::<JobObject>(wire).unwrap().into_job().unwrap();
        assert_eq!(job.status, JobStatus::Queued);
        assert_eq!(job.hyperparams, HostedHyperparams::default());
        let back = JobObject::from_job(&job).into_job().unwrap();
        assert_eq!(back, job);
    }

    #[test]
    fn lr_multiplier_serializes_verbatim() {
        let body = serde_json::to_string(&HostedHyperparams::default()).unwrap();
        assert_eq!(body, r#"{"n_epochs":4,"batch_size":4,"learning_rate_multiplier":1.57}"#);
    }

    proptest! {
        #[test]
        fn multipart_round_trip(data in prop::collection::vec(any::<u8>(), 0..300), name in "[a-z]{1,8}") {
            let parts = vec![
                Part { name: "purpose".into(), filename: None, data: b"fine-tune".to_vec() },
                Part { name, filename: Some("train.jsonl".into()), data },
            ];
            let body = encode_multipart(&parts);
            let back = decode_multipart(&multipart_content_type(), &body).unwrap();
            prop_assert_eq!(back, parts);
        }
    }
}
