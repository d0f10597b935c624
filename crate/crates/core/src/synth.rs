//! Seeded generator for a linearly separable toy corpus, used to exercise the
//! training loop at desk scale.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{split_corpus, CorpusError, LabelSource, SplitRatios};
use crate::{Label, LabeledCorpus, LabeledExample, Post};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub examples: usize,
    pub vocab: usize,
    /// Tokens drawn from the example's own class block.
    pub class_tokens: usize,
    /// Tokens drawn from the shared block.
    pub shared_tokens: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { examples: 1000, vocab: 200, class_tokens: 4, shared_tokens: 6, seed: 42 }
    }
}

/// Vocabulary `w000..`: the first 40% belongs to DEPRESSED, the next 40% to
/// NON_DEPRESSED, the rest is shared noise. Classes alternate so the corpus is
/// balanced; the result is split 80/10/10 with the same seed.
pub fn separable_corpus(spec: SynthSpec) -> Result<LabeledCorpus, CorpusError> {
    let block = spec.vocab * 2 / 5;
    let shared = spec.vocab - 2 * block;
    if block == 0 || shared == 0 {
        return Err(CorpusError::InvalidRules(format!("vocab {} too small", spec.vocab)));
    }
    let word = |i: usize| format!("w{i:03}");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t0 = Utc.with_ymd_and_hms(2016, 12, 1, 0, 0, 0).unwrap();
    let mut examples = Vec::with_capacity(spec.examples);
    for i in 0..spec.examples {
        let label = if i % 2 == 0 { Label::Depressed } else { Label::NonDepressed };
        let offset = if label == Label::Depressed { 0 } else { block };
        let mut toks = Vec::with_capacity(spec.class_tokens + spec.shared_tokens);
        for _ in 0..spec.class_tokens {
            toks.push(word(offset + rng.gen_range(0..block)));
        }
        for _ in 0..spec.shared_tokens {
            toks.push(word(2 * block + rng.gen_range(0..shared)));
        }
        toks.shuffle(&mut rng);
        let text = toks.join(" ");
        let post = Post::new(
            format!("syn-{i:04}"),
            format!("syn-user-{:03}", i % 100),
            t0 + Duration::minutes(i as i64),
            text.clone(),
        )?;
        examples.push(LabeledExample {
            post,
            label,
            source: match label {
                Label::Depressed => LabelSource::D1Depressed,
                Label::NonDepressed => LabelSource::D2NonDepressed,
            },
            normalized_text: text,
            emoji_count: 0,
            emoji_polarity_sum: 0,
        });
    }
    let corpus = LabeledCorpus { examples, ..LabeledCorpus::default() };
    split_corpus(corpus, SplitRatios::default(), spec.seed)
}
