use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledCorpus, Split};
use crate::infer::PromptTemplate;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

/// One fine-tuning example: `{"messages":[system, user, assistant]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRecord {
    pub messages: Vec<ChatMessage>,
}

impl ChatRecord {
    pub fn check_shape(&self) -> Result<(), String> {
        let roles: Vec<Role> = self.messages.iter().map(|m| m.role).collect();
        if roles != [Role::System, Role::User, Role::Assistant] {
            return Err(format!("expected roles [system, user, assistant], got {roles:?}"));
        }
        if let Some(m) = self.messages.iter().find(|m| m.content.is_empty()) {
            return Err(format!("{:?} message has empty content", m.role));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("chat record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChatFormatError {
    #[error("chat file is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("chat file must end with a newline")]
    MissingTrailingNewline,
}

/// Parse and schema-check a chat-format file. Every line, including the last,
/// must be a three-message record terminated by `\n`.
pub fn parse_chat_jsonl(src: &str) -> Result<Vec<ChatRecord>, ChatFormatError> {
    if src.is_empty() {
        return Err(ChatFormatError::Empty);
    }
    let mut records = Vec::new();
    for (idx, line) in src.split_terminator('\n').enumerate() {
        let line_no = idx + 1;
        let rec: ChatRecord = serde_json::from_str(line)
            .map_err(|e| ChatFormatError::Line { line: line_no, message: e.to_string() })?;
        rec.check_shape()
            .map_err(|message| ChatFormatError::Line { line: line_no, message })?;
        records.push(rec);
    }
    if !src.ends_with('\n') {
        return Err(ChatFormatError::MissingTrailingNewline);
    }
    Ok(records)
}

/// Number of records, or the first schema problem.
pub fn validate_chat_jsonl(src: &str) -> Result<usize, ChatFormatError> {
    parse_chat_jsonl(src).map(|r| r.len())
}

pub fn read_chat_jsonl(path: &Path) -> Result<Vec<ChatRecord>, CorpusError> {
    let src = fs::read_to_string(path)
        .map_err(|source| CorpusError::Read { path: path.to_path_buf(), source })?;
    parse_chat_jsonl(&src).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        line: match e {
            ChatFormatError::Line { line, .. } => line,
            _ => 0,
        },
        message: e.to_string(),
    })
}

pub fn write_chat_jsonl(records: &[ChatRecord], path: &Path) -> Result<usize, CorpusError> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_line());
        buf.push('\n');
    }
    util::write_atomic(path, buf.as_bytes())
        .map_err(|source| CorpusError::Write { path: path.to_path_buf(), source })?;
    Ok(records.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExportSummary {
    pub written: usize,
    pub skipped_empty: usize,
}

/// Write the examples of `split` as chat-format training records: the system
/// instruction, the wrapped normalised post, and the gold label keyword.
pub fn export_chat_jsonl(
    corpus: &LabeledCorpus,
    split: Split,
    template: &PromptTemplate,
    path: &Path,
) -> Result<ExportSummary, CorpusError> {
    template
        .validate()
        .map_err(|e| CorpusError::InvalidRules(format!("prompt template: {e}")))?;
    let mut summary = ExportSummary::default();
    let mut records = Vec::new();
    for ex in corpus.examples_in(split) {
        if ex.normalized_text.trim().is_empty() {
            summary.skipped_empty += 1;
            continue;
        }
        let user = template
            .user_content(&ex.normalized_text)
            .map_err(|e| CorpusError::InvalidRules(format!("prompt template: {e}")))?;
        records.push(ChatRecord {
            messages: vec![
                ChatMessage::new(Role::System, template.system_instruction.clone()),
                ChatMessage::new(Role::User, user),
                ChatMessage::new(Role::Assistant, template.keyword_for(ex.label)),
            ],
        });
    }
    if records.is_empty() && summary.skipped_empty == 0 {
        return Err(CorpusError::EmptySplit(split));
    }
    summary.written = write_chat_jsonl(&records, path)?;
    Ok(summary)
}
