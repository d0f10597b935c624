use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_segmentation::UnicodeSegmentation;

use super::CorpusError;

const VARIATION_SELECTOR_16: char = '\u{FE0F}';
const KEYCAP: char = '\u{20E3}';

/// Emoji sentiment lookup: emoji sequence → polarity in {-1, 0, +1}.
///
/// Keys are stored as grapheme-cluster sequences with VS16 removed, so `❤️` and
/// `❤` hit the same entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmojiSentimentLibrary {
    entries: HashMap<Vec<String>, i8>,
    max_key_len: usize,
}

/// Emoji presentation heuristic for one grapheme cluster.
pub fn is_emoji_grapheme(g: &str) -> bool {
    g.chars().any(|c| {
        matches!(c as u32,
            0x1F000..=0x1FAFF
            | 0x2300..=0x23FF
            | 0x2600..=0x27BF
            | 0x2B00..=0x2BFF
            | 0x3030 | 0x303D | 0x3297 | 0x3299)
            || c == VARIATION_SELECTOR_16
            || c == KEYCAP
    })
}

fn key_of(seq: &str) -> Vec<String> {
    seq.graphemes(true)
        .map(|g| g.chars().filter(|&c| c != VARIATION_SELECTOR_16).collect())
        .collect()
}

impl EmojiSentimentLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Small library bundled with the crate.
    pub fn builtin() -> Self {
        Self::parse_tsv(include_str!("../../data/emoji_sentiment.tsv"))
            .expect("bundled emoji library is valid")
    }

    pub fn insert(&mut self, emoji: &str, polarity: i8) -> Result<(), CorpusError> {
        if !(-1..=1).contains(&polarity) {
            return Err(CorpusError::Library {
                line: None,
                message: format!("polarity {polarity} for {emoji:?} is not in {{-1, 0, 1}}"),
            });
        }
        if emoji.is_empty() || !emoji.graphemes(true).all(is_emoji_grapheme) {
            return Err(CorpusError::Library {
                line: None,
                message: format!("{emoji:?} is not an emoji sequence"),
            });
        }
        let key = key_of(emoji);
        if self.entries.contains_key(&key) {
            return Err(CorpusError::Library {
                line: None,
                message: format!("duplicate entry for {emoji:?}"),
            });
        }
        self.max_key_len = self.max_key_len.max(key.len());
        self.entries.insert(key, polarity);
        Ok(())
    }

    pub fn polarity(&self, emoji: &str) -> Option<i8> {
        self.entries.get(&key_of(emoji)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parse `emoji<TAB>polarity` lines. Blank lines and `#` comments are skipped.
    pub fn parse_tsv(src: &str) -> Result<Self, CorpusError> {
        let mut lib = EmojiSentimentLibrary::new();
        for (idx, line) in src.lines().enumerate() {
            let lineno = idx + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (emoji, pol) = trimmed.split_once('\t').ok_or_else(|| CorpusError::Library {
                line: Some(lineno),
                message: "expected `emoji<TAB>polarity`".into(),
            })?;
            let polarity: i8 = pol.trim().parse().map_err(|_| CorpusError::Library {
                line: Some(lineno),
                message: format!("invalid polarity {:?}", pol.trim()),
            })?;
            lib.insert(emoji.trim(), polarity).map_err(|e| match e {
                CorpusError::Library { message, .. } => CorpusError::Library { line: Some(lineno), message },
                other => other,
            })?;
        }
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let src = fs::read_to_string(path).map_err(|source| CorpusError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_tsv(&src)
    }
}

/// Emoji count and summed polarity of `text`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmojiAnnotation {
    pub count: u32,
    pub polarity_sum: i64,
}

/// Scan `text` for emoji, preferring the longest library key at each position.
/// Emoji missing from the library count once with polarity 0.
pub fn annotate_emojis(text: &str, lib: &EmojiSentimentLibrary) -> EmojiAnnotation {
    let graphemes: Vec<&str> = text.graphemes(true).collect();
    let keys: Vec<String> = graphemes
        .iter()
        .map(|g| g.chars().filter(|&c| c != VARIATION_SELECTOR_16).collect())
        .collect();
    let mut out = EmojiAnnotation::default();
    let mut i = 0;
    while i < keys.len() {
        let longest = (1..=lib.max_key_len.min(keys.len() - i))
            .rev()
            .find_map(|n| lib.entries.get(&keys[i..i + n]).map(|&p| (n, p)));
        match longest {
            Some((n, p)) => {
                out.count += 1;
                out.polarity_sum += i64::from(p);
                i += n;
            }
            None => {
                if is_emoji_grapheme(graphemes[i]) {
                    out.count += 1;
                }
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> EmojiSentimentLibrary {
        EmojiSentimentLibrary::parse_tsv("😭\t-1\n🙂\t1\n😐\t0\n❤️\t1\n").unwrap()
    }

    #[test]
    fn no_emoji() {
        assert_eq!(annotate_emojis("just words here", &fixture()), EmojiAnnotation::default());
    }

    #[test]
    fn repeated_negative() {
        let a = annotate_emojis("😭😭", &fixture());
        assert_eq!((a.count, a.polarity_sum), (2, -2));
    }

    #[test]
    fn cancellation() {
        let a = annotate_emojis("🙂😭", &fixture());
        assert_eq!((a.count, a.polarity_sum), (2, 0));
    }

    #[test]
    fn unknown_emoji_counts_without_polarity() {
        let a = annotate_emojis("ok 🦀 then 😭", &fixture());
        assert_eq!((a.count, a.polarity_sum), (2, -1));
    }

    #[test]
    fn variation_selector_is_ignored() {
        let lib = fixture();
        assert_eq!(annotate_emojis("❤", &lib).polarity_sum, 1);
        assert_eq!(annotate_emojis("❤️", &lib).polarity_sum, 1);
    }

    #[test]
    fn longest_match_wins() {
        let mut lib = fixture();
        lib.insert("😭🙂", 0).unwrap();
        let a = annotate_emojis("😭🙂😭", &lib);
        assert_eq!((a.count, a.polarity_sum), (2, -1));
    }

    #[test]
    fn zwj_and_skin_tone_sequences_are_single_emoji() {
        let a = annotate_emojis("👩‍👩‍👧 👍🏽", &fixture());
        assert_eq!(a.count, 2);
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = EmojiSentimentLibrary::parse_tsv("😭\t-1\n🙂\t5\n").unwrap_err();
        assert!(matches!(err, CorpusError::Library { line: Some(2), .. }), "{err}");
        let err = EmojiSentimentLibrary::parse_tsv("😭\t-1\n😭\t-1\n").unwrap_err();
        assert!(matches!(err, CorpusError::Library { line: Some(2), .. }));
        let err = EmojiSentimentLibrary::parse_tsv("abc\t1\n").unwrap_err();
        assert!(matches!(err, CorpusError::Library { line: Some(1), .. }));
        let err = EmojiSentimentLibrary::parse_tsv("😭 -1\n").unwrap_err();
        assert!(matches!(err, CorpusError::Library { line: Some(1), .. }));
    }

    #[test]
    fn builtin_loads() {
        let lib = EmojiSentimentLibrary::builtin();
        assert!(lib.len() >= 40);
        assert_eq!(lib.polarity("😭"), Some(-1));
        assert_eq!(lib.polarity("☹"), Some(-1));
    }

    proptest! {
        #[test]
        fn polarity_sum_is_additive_over_concatenation(
            a in prop::collection::vec(prop::sample::select(vec!["😭", "🙂", "😐", "🦀", "hi", " ", "x"]), 0..12),
            b in prop::collection::vec(prop::sample::select(vec!["😭", "🙂", "😐", "🦀", "hi", " ", "x"]), 0..12),
        ) {
            let lib = fixture();
            let (a, b) = (a.concat(), b.concat());
            let whole = annotate_emojis(&format!("{a}{b}"), &lib);
            let pa = annotate_emojis(&a, &lib);
            let pb = annotate_emojis(&b, &lib);
            prop_assert_eq!(whole.polarity_sum, pa.polarity_sum + pb.polarity_sum);
            prop_assert_eq!(whole.count, pa.count + pb.count);
        }
    }
}
