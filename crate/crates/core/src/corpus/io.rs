use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabelSource, LabeledCorpus, LabeledExample, Post, Split, SplitRatios, UserRecord};
use crate::{util, Label};

/// One line of a posts file. `label` is only consulted for D3 candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Default)]
pub struct PostsFile {
    pub posts: Vec<Post>,
    pub human_labels: HashMap<String, Label>,
}

fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Read { path: path.to_path_buf(), source })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Read a line-delimited JSON posts file. Blank lines are skipped; every other
/// problem is reported with its 1-based line number.
pub fn read_posts(path: &Path) -> Result<PostsFile, CorpusError> {
    let src = read_to_string(path)?;
    let mut out = PostsFile::default();
    for (idx, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PostRecord =
            serde_json::from_str(line).map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        if let Some(label) = rec.label {
            out.human_labels.insert(rec.id.clone(), label);
        }
        let post = Post::new(rec.id, rec.author_id, rec.created_at, rec.text)
            .map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        out.posts.push(post);
    }
    Ok(out)
}

pub fn write_posts<'a>(
    path: &Path,
    posts: impl IntoIterator<Item = (&'a Post, Option<Label>)>,
) -> Result<usize, CorpusError> {
    let mut buf = String::new();
    let mut n = 0;
    for (post, label) in posts {
        let rec = PostRecord {
            id: post.id.clone(),
            author_id: post.author_id.clone(),
            created_at: post.created_at,
            text: post.text.clone(),
            label,
        };
        buf.push_str(&serde_json::to_string(&rec).expect("post record serializes"));
        buf.push('\n');
        n += 1;
    }
    util::write_atomic(path, buf.as_bytes())
        .map_err(|source| CorpusError::Write { path: path.to_path_buf(), source })?;
    Ok(n)
}

/// Group posts into per-author records, ordered by author id.
pub fn group_users(posts: Vec<Post>) -> Vec<UserRecord> {
    let mut by_author: BTreeMap<String, Vec<Post>> = BTreeMap::new();
    for p in posts {
        by_author.entry(p.author_id.clone()).or_default().push(p);
    }
    by_author
        .into_iter()
        .map(|(author, posts)| UserRecord::new(author, posts).expect("grouped by author"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    author_id: String,
    created_at: DateTime<Utc>,
    text: String,
    normalized_text: String,
    label: Label,
    source: LabelSource,
    emoji_count: u32,
    emoji_polarity_sum: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusMeta {
    examples: usize,
    split_seed: Option<u64>,
    split_ratios: Option<SplitRatios>,
    class_counts: BTreeMap<Label, usize>,
    split_counts: BTreeMap<Split, BTreeMap<Label, usize>>,
}

pub fn meta_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    corpus_path.with_file_name(name)
}

/// Write the corpus as JSON lines plus a `<stem>.meta.json` sidecar holding the
/// split seed, ratios and class counts.
pub fn write_corpus(corpus: &LabeledCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut buf = String::new();
    for ex in &corpus.examples {
        let rec = CorpusRecord {
            id: ex.post.id.clone(),
            author_id: ex.post.author_id.clone(),
            created_at: ex.post.created_at,
            text: ex.post.text.clone(),
            normalized_text: ex.normalized_text.clone(),
            label: ex.label,
            source: ex.source,
            emoji_count: ex.emoji_count,
            emoji_polarity_sum: ex.emoji_polarity_sum,
            split: corpus.split_of(&ex.post.id),
        };
        buf.push_str(&serde_json::to_string(&rec).expect("corpus record serializes"));
        buf.push('\n');
    }
    let write = |p: &Path, bytes: &[u8]| {
        util::write_atomic(p, bytes).map_err(|source| CorpusError::Write { path: p.to_path_buf(), source })
    };
    write(path, buf.as_bytes())?;
    let meta = CorpusMeta {
        examples: corpus.examples.len(),
        split_seed: corpus.split_seed,
        split_ratios: corpus.split_ratios,
        class_counts: corpus.class_counts(),
        split_counts: corpus.split_counts(),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_json.push('\n');
    write(&meta_path(path), meta_json.as_bytes())
}

pub fn read_corpus(path: &Path) -> Result<LabeledCorpus, CorpusError> {
    let src = read_to_string(path)?;
    let mut corpus = LabeledCorpus::default();
    for (idx, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord =
            serde_json::from_str(line).map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        if let Some(s) = rec.split {
            corpus.splits.insert(rec.id.clone(), s);
        }
        let post = Post::new(rec.id, rec.author_id, rec.created_at, rec.text)
            .map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        corpus.examples.push(LabeledExample {
            post,
            label: rec.label,
            source: rec.source,
            normalized_text: rec.normalized_text,
            emoji_count: rec.emoji_count,
            emoji_polarity_sum: rec.emoji_polarity_sum,
        });
    }
    let mp = meta_path(path);
    if mp.exists() {
        let meta: CorpusMeta = serde_json::from_str(&read_to_string(&mp)?)
            .map_err(|e| parse_err(&mp, e.line(), e.to_string()))?;
        corpus.split_seed = meta.split_seed;
        corpus.split_ratios = meta.split_ratios;
    }
    Ok(corpus)
}
