#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use depscreen::corpus::{LabelSource, Split};
use depscreen::{Label, LabeledCorpus, LabeledExample, Post};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Compare `actual` with a committed file. With `UPDATE_GOLDEN=1` the file is
/// rewritten instead.
pub fn check_golden(rel: &str, actual: &[u8]) -> Result<(), String> {
    let path = fixture(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!(
            "{} differs from output:\n--- expected\n{}\n--- actual\n{}",
            rel,
            String::from_utf8_lossy(&expected),
            String::from_utf8_lossy(actual)
        ))
    }
}

/// Three training examples used by the chat-export golden file.
pub fn chat_golden_corpus() -> LabeledCorpus {
    let rows = [
        ("g1", Label::Depressed, "i feel empty @bob"),
        ("g2", Label::NonDepressed, "great game tonight https://x.co/abc"),
        ("g3", Label::Depressed, "she said \"no\"   {post}"),
    ];
    let mut corpus = LabeledCorpus::default();
    for (id, label, text) in rows {
        let post = Post::new(id, "u1", "2016-12-02T00:00:00Z".parse().unwrap(), text).unwrap();
        corpus.examples.push(LabeledExample {
            normalized_text: depscreen::corpus::normalize_text(text),
            post,
            label,
            source: LabelSource::D1Depressed,
            emoji_count: 0,
            emoji_polarity_sum: 0,
        });
        corpus.splits.insert(id.to_string(), Split::Train);
    }
    corpus
}
