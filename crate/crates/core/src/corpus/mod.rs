//! Corpus curation: anchor-rule labeling, emoji annotation, splitting and
//! chat-format export.

mod anchor;
mod chat;
mod emoji;
mod io;
mod normalize;
mod split;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::Label;

pub use anchor::{
    classify_anchor, AnchorRuleSet, LabelSource, TimeWindow, DEFAULT_DEPRESSION_SUBSTRING,
    DEFAULT_DIAGNOSIS_PATTERNS,
};
pub use chat::{
    export_chat_jsonl, parse_chat_jsonl, read_chat_jsonl, validate_chat_jsonl, write_chat_jsonl,
    ChatFormatError, ChatMessage, ChatRecord, ExportSummary, Role,
};
pub use emoji::{annotate_emojis, is_emoji_grapheme, EmojiAnnotation, EmojiSentimentLibrary};
pub use io::{group_users, meta_path, read_corpus, read_posts, write_corpus, write_posts, PostRecord, PostsFile};
pub use normalize::{normalize_text, URL_TOKEN, USER_TOKEN};
pub use split::{split_corpus, Split, SplitRatios};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("input contains no users or posts")]
    EmptyInput,
    #[error("duplicate post id {0:?}")]
    DuplicatePostId(String),
    #[error("post {post_id:?} has author {found:?} but belongs to user {expected:?}")]
    AuthorMismatch { post_id: String, expected: String, found: String },
    #[error("post text is empty{}", .post_id.as_ref().map(|id| format!(" (post {id:?})")).unwrap_or_default())]
    EmptyText { post_id: Option<String> },
    #[error("invalid anchor rules: {0}")]
    InvalidRules(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("class {label} has {count} examples, fewer than the {splits} splits")]
    ClassTooSmall { label: Label, count: usize, splits: usize },
    #[error("split {0} has no examples")]
    EmptySplit(Split),
    #[error("emoji library{}: {message}", .line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Library { line: Option<usize>, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// A raw social-media post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
}

impl Post {
    pub fn new(
        id: impl Into<String>,
        author_id: impl Into<String>,
        created_at: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let post = Post { id: id.into(), author_id: author_id.into(), created_at, text: text.into() };
        if post.text.trim().is_empty() {
            return Err(CorpusError::EmptyText { post_id: Some(post.id) });
        }
        Ok(post)
    }
}

/// All posts of one author, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub author_id: String,
    posts: Vec<Post>,
}

impl UserRecord {
    pub fn new(author_id: impl Into<String>, mut posts: Vec<Post>) -> Result<Self, CorpusError> {
        let author_id = author_id.into();
        if let Some(p) = posts.iter().find(|p| p.author_id != author_id) {
            return Err(CorpusError::AuthorMismatch {
                post_id: p.id.clone(),
                expected: author_id,
                found: p.author_id.clone(),
            });
        }
        posts.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(UserRecord { author_id, posts })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub post: Post,
    pub label: Label,
    pub source: LabelSource,
    pub normalized_text: String,
    pub emoji_count: u32,
    pub emoji_polarity_sum: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCorpus {
    pub examples: Vec<LabeledExample>,
    pub split_seed: Option<u64>,
    pub split_ratios: Option<SplitRatios>,
    /// Example id → split. Empty until [`split_corpus`] runs.
    pub splits: BTreeMap<String, Split>,
}

impl LabeledCorpus {
    pub fn is_split(&self) -> bool {
        !self.splits.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    pub fn examples_in(&self, split: Split) -> impl Iterator<Item = &LabeledExample> + '_ {
        self.examples
            .iter()
            .filter(move |ex| self.splits.get(&ex.post.id) == Some(&split))
    }

    /// Class counts per split (every split and class present, possibly zero).
    pub fn split_counts(&self) -> BTreeMap<Split, BTreeMap<Label, usize>> {
        let mut out: BTreeMap<Split, BTreeMap<Label, usize>> = Split::ALL
            .iter()
            .map(|s| (*s, Label::ALL.iter().map(|l| (*l, 0)).collect()))
            .collect();
        for ex in &self.examples {
            if let Some(s) = self.splits.get(&ex.post.id) {
                *out.get_mut(s).unwrap().get_mut(&ex.label).unwrap() += 1;
            }
        }
        out
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut out: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 0)).collect();
        for ex in &self.examples {
            *out.get_mut(&ex.label).unwrap() += 1;
        }
        out
    }
}

/// A D3 candidate waiting for a human label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub post: Post,
    pub normalized_text: String,
    pub emoji_polarity_sum: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub users_seen: usize,
    pub users_skipped_empty: usize,
    pub posts_seen: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3_reviewed: usize,
    pub d3_pending: usize,
    pub unlabeled: usize,
    /// Human labels supplied for D1/D2 posts that disagree with the rule label;
    /// the rule label is kept.
    pub ignored_label_conflicts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBuild {
    pub corpus: LabeledCorpus,
    pub review_queue: Vec<ReviewItem>,
    pub stats: BuildStats,
}

/// Classify and annotate every post. D1/D2 posts are labeled by rule; D3 posts
/// enter the corpus only if `human_labels` has an entry for them, otherwise
/// they go to the review queue. Examples come out sorted by post id.
pub fn build_corpus<I>(
    users: I,
    rules: &AnchorRuleSet,
    window: &TimeWindow,
    lib: &EmojiSentimentLibrary,
    human_labels: &HashMap<String, Label>,
) -> Result<CorpusBuild, CorpusError>
where
    I: IntoIterator<Item = UserRecord>,
{
    rules.validate()?;
    let mut seen_ids = HashSet::new();
    let mut stats = BuildStats::default();
    let mut examples = Vec::new();
    let mut review_queue = Vec::new();

    for user in users {
        stats.users_seen += 1;
        if user.posts.is_empty() {
            stats.users_skipped_empty += 1;
            log::warn!("user {:?} has no posts; skipped", user.author_id);
            continue;
        }
        for post in user.posts {
            stats.posts_seen += 1;
            if !seen_ids.insert(post.id.clone()) {
                return Err(CorpusError::DuplicatePostId(post.id));
            }
            let source = classify_anchor(&post.text, post.created_at, rules, window).map_err(|e| match e {
                CorpusError::EmptyText { .. } => CorpusError::EmptyText { post_id: Some(post.id.clone()) },
                other => other,
            })?;
            let normalized_text = normalize_text(&post.text);
            let emoji = annotate_emojis(&post.text, lib);
            let human = human_labels.get(&post.id).copied();
            let label = match source {
                LabelSource::D1Depressed | LabelSource::D2NonDepressed => {
                    let rule_label = if source == LabelSource::D1Depressed {
                        stats.d1 += 1;
                        Label::Depressed
                    } else {
                        stats.d2 += 1;
                        Label::NonDepressed
                    };
                    if human.is_some_and(|h| h != rule_label) {
                        stats.ignored_label_conflicts += 1;
                    }
                    rule_label
                }
                LabelSource::D3Candidate => match human {
                    Some(h) => {
                        stats.d3_reviewed += 1;
                        h
                    }
                    None => {
                        stats.d3_pending += 1;
                        review_queue.push(ReviewItem {
                            post,
                            normalized_text,
                            emoji_polarity_sum: emoji.polarity_sum,
                        });
                        continue;
                    }
                },
                LabelSource::None => {
                    stats.unlabeled += 1;
                    continue;
                }
            };
            examples.push(LabeledExample {
                post,
                label,
                source,
                normalized_text,
                emoji_count: emoji.count,
                emoji_polarity_sum: emoji.polarity_sum,
            });
        }
    }
    if stats.posts_seen == 0 {
        return Err(CorpusError::EmptyInput);
    }
    examples.sort_by(|a, b| a.post.id.cmp(&b.post.id));
    review_queue.sort_by(|a, b| a.post.id.cmp(&b.post.id));
    Ok(CorpusBuild {
        corpus: LabeledCorpus { examples, ..LabeledCorpus::default() },
        review_queue,
        stats,
    })
}
