use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledCorpus};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "TRAIN",
            Split::Val => "VAL",
            Split::Test => "TEST",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(CorpusError::InvalidRatios(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = self.as_array();
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(CorpusError::InvalidRatios(format!(
                "ratios must be positive, got {:?}",
                parts
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl FromStr for SplitRatios {
    type Err = CorpusError;

    /// `"0.8,0.1,0.1"`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CorpusError::InvalidRatios(format!("{s:?}: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => SplitRatios::new(*a, *b, *c),
            _ => Err(CorpusError::InvalidRatios(format!("{s:?}: expected three comma-separated fractions"))),
        }
    }
}

/// Largest-remainder apportionment of `total` by `weights` (ties → lower index).
fn apportion(total: usize, weights: [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut fracs = [0f64; 3];
    for s in 0..3 {
        let raw = total as f64 * weights[s];
        let snapped = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw };
        counts[s] = snapped.floor() as usize;
        fracs[s] = snapped - snapped.floor();
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| fracs[b].total_cmp(&fracs[a]).then(a.cmp(&b)));
    for &s in order.iter().take(total.saturating_sub(assigned)) {
        counts[s] += 1;
    }
    counts
}

/// Per-class split sizes. Split totals come from apportioning the whole corpus;
/// the first class is then rounded to floor/ceil of its exact quota
/// `n_c * T_s / N` (largest remainder, exact integer arithmetic) and the second
/// class takes what is left, so both margins hold exactly and every cell is
/// within one example of its proportional share.
fn class_split_sizes(class_counts: [usize; 2], ratios: &SplitRatios) -> [[usize; 3]; 2] {
    let n: usize = class_counts.iter().sum();
    let totals = apportion(n, ratios.as_array());
    let n0 = class_counts[0];
    let mut first = [0usize; 3];
    let mut rems = [0usize; 3];
    for s in 0..3 {
        first[s] = n0 * totals[s] / n;
        rems[s] = n0 * totals[s] % n;
    }
    let deficit = n0 - first.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &s in order.iter().take(deficit) {
        first[s] += 1;
    }
    let second = [totals[0] - first[0], totals[1] - first[1], totals[2] - first[2]];
    [first, second]
}

/// Deterministic stratified split. Example ids are sorted, each class is
/// shuffled with a ChaCha8 stream seeded from `seed` (DEPRESSED first), then
/// dealt into TRAIN, VAL, TEST in that order.
pub fn split_corpus(
    mut corpus: LabeledCorpus,
    ratios: SplitRatios,
    seed: u64,
) -> Result<LabeledCorpus, CorpusError> {
    ratios.validate()?;
    if corpus.examples.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut by_class: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for label in Label::ALL {
        by_class.insert(label, Vec::new());
    }
    for ex in &corpus.examples {
        by_class.get_mut(&ex.label).unwrap().push(ex.post.id.clone());
    }
    for (label, ids) in &mut by_class {
        if ids.len() < Split::ALL.len() {
            return Err(CorpusError::ClassTooSmall {
                label: *label,
                count: ids.len(),
                splits: Split::ALL.len(),
            });
        }
        ids.sort();
    }
    let counts = [by_class[&Label::Depressed].len(), by_class[&Label::NonDepressed].len()];
    let sizes = class_split_sizes(counts, &ratios);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = BTreeMap::new();
    for (ci, label) in Label::ALL.iter().enumerate() {
        let ids = by_class.get_mut(label).unwrap();
        ids.shuffle(&mut rng);
        let mut it = ids.iter();
        for (si, split) in Split::ALL.iter().enumerate() {
            for id in it.by_ref().take(sizes[ci][si]) {
                splits.insert(id.clone(), *split);
            }
        }
    }
    corpus.splits = splits;
    corpus.split_seed = Some(seed);
    corpus.split_ratios = Some(ratios);
    Ok(corpus)
}
