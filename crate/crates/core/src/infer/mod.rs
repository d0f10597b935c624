//! Prompting, free-text label parsing and batch prediction.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, ChatMessage, Role};
use crate::hosted::HostedClient;
use crate::trainer::LogisticModel;
use crate::{write_atomic, Label, Post};

pub const DEFAULT_SYSTEM_INSTRUCTION: &str =
    "You are a mental-health text classifier. Answer with exactly one word: depressive or non-depressive.";
pub const DEFAULT_USER_WRAPPER: &str = "Classify the following post: {post}";
pub const PLACEHOLDER: &str = "{post}";

#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("nothing to predict: the batch is empty")]
    EmptyBatch,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub system_instruction: String,
    pub user_wrapper: String,
    pub positive_keyword: String,
    pub negative_keyword: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            system_instruction: DEFAULT_SYSTEM_INSTRUCTION.into(),
            user_wrapper: DEFAULT_USER_WRAPPER.into(),
            positive_keyword: "depressive".into(),
            negative_keyword: "non-depressive".into(),
        }
    }
}

/// Lowercase and drop hyphens and whitespace, so "Non Depressive" and
/// "non-depressive" compare equal.
pub fn normalize_keyword(s: &str) -> String {
    s.chars()
        .filter(|c| *c != '-' && !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

impl PromptTemplate {
    /// The negative keyword is matched first, so it may contain the positive
    /// one ("non-depressive" ⊃ "depressive"); the reverse would make every
    /// positive answer parse as negative and is rejected.
    pub fn validate(&self) -> Result<(), InferError> {
        let n = self.user_wrapper.matches(PLACEHOLDER).count();
        if n != 1 {
            return Err(InferError::InvalidTemplate(format!(
                "user wrapper must contain {PLACEHOLDER} exactly once, found {n}"
            )));
        }
        let pos = normalize_keyword(&self.positive_keyword);
        let neg = normalize_keyword(&self.negative_keyword);
        if pos.is_empty() || neg.is_empty() {
            return Err(InferError::InvalidTemplate("keywords must be non-empty".into()));
        }
        if pos == neg {
            return Err(InferError::InvalidTemplate("keywords must differ case-insensitively".into()));
        }
        if pos.contains(&neg) {
            return Err(InferError::InvalidTemplate(format!(
                "positive keyword {:?} contains negative keyword {:?}",
                self.positive_keyword, self.negative_keyword
            )));
        }
        Ok(())
    }

    /// Wrap `post` in the user template. Only the single placeholder is
    /// substituted; braces inside the post survive as-is.
    pub fn user_content(&self, post: &str) -> Result<String, InferError> {
        self.validate()?;
        Ok(self.user_wrapper.replacen(PLACEHOLDER, post, 1))
    }

    pub fn keyword_for(&self, label: Label) -> String {
        match label {
            Label::Depressed => self.positive_keyword.clone(),
            Label::NonDepressed => self.negative_keyword.clone(),
        }
    }
}

/// System and user messages for one post. The post text is used verbatim.
pub fn render_prompt(template: &PromptTemplate, post: &Post) -> Result<Vec<ChatMessage>, InferError> {
    Ok(vec![
        ChatMessage::new(Role::System, template.system_instruction.clone()),
        ChatMessage::new(Role::User, template.user_content(&post.text)?),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredictedLabel {
    Depressed,
    NonDepressed,
    /// The model answered, but with neither keyword.
    Unparsed,
    /// The request failed after retries.
    Failed,
}

impl PredictedLabel {
    pub fn label(self) -> Option<Label> {
        match self {
            PredictedLabel::Depressed => Some(Label::Depressed),
            PredictedLabel::NonDepressed => Some(Label::NonDepressed),
            _ => None,
        }
    }
}

impl From<Label> for PredictedLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Depressed => PredictedLabel::Depressed,
            Label::NonDepressed => PredictedLabel::NonDepressed,
        }
    }
}

/// Map free text to a label. Total: never fails.
pub fn parse_label(raw: &str, template: &PromptTemplate) -> PredictedLabel {
    let text = normalize_keyword(raw);
    let neg = normalize_keyword(&template.negative_keyword);
    let pos = normalize_keyword(&template.positive_keyword);
    if !neg.is_empty() && text.contains(&neg) {
        PredictedLabel::NonDepressed
    } else if !pos.is_empty() && text.contains(&pos) {
        PredictedLabel::Depressed
    } else {
        PredictedLabel::Unparsed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub post_id: String,
    pub label: PredictedLabel,
    pub raw_output: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Bounded concurrency and a request-rate ceiling for the hosted path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostedInferOptions {
    pub concurrency: usize,
    /// Requests per second across all workers; `None` means unlimited.
    pub max_requests_per_second: Option<f64>,
}

impl Default for HostedInferOptions {
    fn default() -> Self {
        HostedInferOptions { concurrency: 4, max_requests_per_second: None }
    }
}

pub enum Predictor<'a> {
    /// Thresholds the classifier probability at 0.5; no prompting.
    Local(&'a LogisticModel),
    Hosted { client: &'a HostedClient, model: String, options: HostedInferOptions },
}

pub fn predict_batch(
    predictor: &Predictor<'_>,
    posts: &[Post],
    template: &PromptTemplate,
) -> Result<Vec<Prediction>, InferError> {
    if posts.is_empty() {
        return Err(InferError::EmptyBatch);
    }
    template.validate()?;
    match predictor {
        Predictor::Local(model) => Ok(predict_local(model, posts)),
        Predictor::Hosted { client, model, options } => Ok(predict_hosted(client, model, posts, template, *options)),
    }
}

/// Latency is left at 0 on this path so repeated runs write identical files.
fn predict_local(model: &LogisticModel, posts: &[Post]) -> Vec<Prediction> {
    posts
        .iter()
        .map(|p| {
            let prob = model.probability(&normalize_text(&p.text));
            let label = if prob > 0.5 { Label::Depressed } else { Label::NonDepressed };
            Prediction {
                post_id: p.id.clone(),
                label: label.into(),
                raw_output: format!("p_depressed={prob:.6}"),
                latency_ms: 0,
                error: None,
            }
        })
        .collect()
}

struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_second: Option<f64>) -> Self {
        let interval = per_second.filter(|r| *r > 0.0 && r.is_finite()).map(|r| Duration::from_secs_f64(1.0 / r));
        RateLimiter { interval, next: Mutex::new(Instant::now()) }
    }

    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

fn predict_hosted(
    client: &HostedClient,
    model: &str,
    posts: &[Post],
    template: &PromptTemplate,
    options: HostedInferOptions,
) -> Vec<Prediction> {
    let workers = options.concurrency.clamp(1, posts.len());
    let limiter = RateLimiter::new(options.max_requests_per_second);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Prediction>>> = Mutex::new(vec![None; posts.len()]);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(post) = posts.get(i) else { break };
                limiter.acquire();
                let p = predict_one(client, model, post, template);
                slots.lock().unwrap()[i] = Some(p);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|p| p.expect("every slot filled")).collect()
}

fn predict_one(client: &HostedClient, model: &str, post: &Post, template: &PromptTemplate) -> Prediction {
    let start = Instant::now();
    let result = render_prompt(template, post)
        .map_err(|e| e.to_string())
        .and_then(|msgs| client.chat_completion(model, &msgs).map_err(|e| e.to_string()));
    let latency_ms = start.elapsed().as_millis() as u64;
    match result {
        Ok(raw) => Prediction {
            post_id: post.id.clone(),
            label: parse_label(&raw, template),
            raw_output: raw,
            latency_ms,
            error: None,
        },
        Err(e) => {
            log::warn!("prediction for {} failed: {e}", post.id);
            Prediction {
                post_id: post.id.clone(),
                label: PredictedLabel::Failed,
                raw_output: String::new(),
                latency_ms,
                error: Some(e),
            }
        }
    }
}

pub fn write_predictions(preds: &[Prediction], path: &Path) -> Result<(), InferError> {
    let mut buf = String::new();
    for p in preds {
        buf.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes()).map_err(|source| InferError::Io { path: path.to_path_buf(), source })
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, InferError> {
    let src = fs::read_to_string(path).map_err(|source| InferError::Io { path: path.to_path_buf(), source })?;
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| InferError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::ts;
    use proptest::prelude::*;

    fn post(id: &str, text: &str) -> Post {
        Post::new(id, "u1", ts("2016-12-05T00:00:00Z"), text).unwrap()
    }

    #[test]
    fn default_template_is_valid() {
        PromptTemplate::default().validate().unwrap();
    }

    #[test]
    fn render_default_wrapper() {
        let msgs = render_prompt(&PromptTemplate::default(), &post("p1", "i feel empty")).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, Role::System);
        assert_eq!(msgs[1].content, "Classify the following post: i feel empty");
    }

    #[test]
    fn placeholder_in_post_is_preserved() {
        let msgs = render_prompt(&PromptTemplate::default(), &post("p1", "what is {post} anyway")).unwrap();
        assert_eq!(msgs[1].content, "Classify the following post: what is {post} anyway");
    }

    #[test]
    fn template_without_placeholder_is_rejected() {
        let t = PromptTemplate { user_wrapper: "Classify:".into(), ..Default::default() };
        assert!(render_prompt(&t, &post("p1", "x")).is_err());
        let t = PromptTemplate { user_wrapper: "{post} {post}".into(), ..Default::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn keyword_rules() {
        let t = PromptTemplate { positive_keyword: "Non Depressive".into(), ..Default::default() };
        assert!(t.validate().is_err());
        let t = PromptTemplate { positive_keyword: "yes".into(), negative_keyword: "no".into(), ..Default::default() };
        assert!(t.validate().is_ok());
        let t = PromptTemplate { positive_keyword: "not ok".into(), negative_keyword: "ok".into(), ..Default::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn parse_examples() {
        let t = PromptTemplate::default();
        assert_eq!(parse_label("This post is depressive.", &t), PredictedLabel::Depressed);
        assert_eq!(parse_label("non-depressive", &t), PredictedLabel::NonDepressed);
        assert_eq!(parse_label("Non Depressive", &t), PredictedLabel::NonDepressed);
        assert_eq!(parse_label("I cannot determine this.", &t), PredictedLabel::Unparsed);
    }

    #[test]
    fn local_path_never_unparsed() {
        let model = LogisticModel::zeros(crate::trainer::Vocabulary::new(vec!["sad".into()]).unwrap());
        let posts = vec![post("a", "sad"), post("b", "happy"), post("c", "meh")];
        let preds = predict_batch(&Predictor::Local(&model), &posts, &PromptTemplate::default()).unwrap();
        assert_eq!(preds.len(), 3);
        assert!(preds.iter().all(|p| p.label != PredictedLabel::Unparsed));
        assert_eq!(preds.iter().map(|p| p.post_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let model = LogisticModel::zeros(crate::trainer::Vocabulary::new(vec![]).unwrap());
        assert!(matches!(
            predict_batch(&Predictor::Local(&model), &[], &PromptTemplate::default()),
            Err(InferError::EmptyBatch)
        ));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let preds = vec![
            Prediction { post_id: "a".into(), label: PredictedLabel::Depressed, raw_output: "depressive".into(), latency_ms: 3, error: None },
            Prediction { post_id: "b".into(), label: PredictedLabel::Failed, raw_output: String::new(), latency_ms: 9, error: Some("boom".into()) },
        ];
        write_predictions(&preds, &path).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), preds);
    }

    proptest! {
        #[test]
        fn negative_keyword_wins(prefix in ".{0,20}", mid in ".{0,20}", suffix in ".{0,20}") {
            let t = PromptTemplate::default();
            let s = format!("{prefix}depressive{mid}non-depressive{suffix}");
            prop_assert_eq!(parse_label(&s, &t), PredictedLabel::NonDepressed);
        }

        #[test]
        fn parse_is_total(s in "\\PC{0,60}") {
            let l = parse_label(&s, &PromptTemplate::default());
            prop_assert!(matches!(l, PredictedLabel::Depressed | PredictedLabel::NonDepressed | PredictedLabel::Unparsed));
        }
    }
}
