//! Desk-scale stand-in for a fine-tuned language model: logistic regression
//! over bag-of-words counts, trained by full-batch gradient descent on mean
//! cross-entropy.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{BackendError, Snapshot, TrainConfig, TrainExample, TrainerBackend};
use crate::Label;

pub const REFERENCE_BACKEND_ID: &str = "reference-logistic-bow";
pub const DEFAULT_VOCAB_SIZE: usize = 2000;

/// Lowercased whitespace-separated tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self, BackendError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(BackendError::new(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// The `k` most frequent tokens of `texts`; ties broken lexicographically.
    pub fn top_k<'a>(texts: impl IntoIterator<Item = &'a str>, k: usize) -> Self {
        let mut freq: BTreeMap<String, u64> = BTreeMap::new();
        for t in texts {
            for tok in tokenize(t) {
                *freq.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        Vocabulary::new(ranked.into_iter().map(|(t, _)| t).collect()).expect("tokens are unique")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = BackendError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::new(v)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Sparse token counts as `(vocab index, count)` pairs sorted by index.
pub type SparseCounts = Vec<(usize, f64)>;

/// In-vocabulary token counts of `text`; out-of-vocabulary tokens are dropped.
pub fn featurize_bow(text: &str, vocab: &Vocabulary) -> SparseCounts {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.get(&tok) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-ln p(y | z)` for a Bernoulli with logit `z`, stable for large |z|.
fn cross_entropy(z: f64, y: f64) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - y * z
}

fn target(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub vocab: Vocabulary,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(vocab: Vocabulary) -> Self {
        let n = vocab.len();
        LogisticModel { vocab, weights: vec![0.0; n], bias: 0.0 }
    }

    pub fn logit(&self, x: &SparseCounts) -> f64 {
        self.bias + x.iter().map(|&(i, c)| self.weights[i] * c).sum::<f64>()
    }

    /// Probability of the positive (DEPRESSED) class.
    pub fn probability(&self, text: &str) -> f64 {
        sigmoid(self.logit(&featurize_bow(text, &self.vocab)))
    }

    /// Thresholded prediction; exactly 0.5 goes to NON_DEPRESSED.
    pub fn predict(&self, text: &str) -> Label {
        if self.probability(text) > 0.5 {
            Label::Depressed
        } else {
            Label::NonDepressed
        }
    }

    /// Mean cross-entropy over `data`.
    pub fn loss(&self, data: &[(SparseCounts, Label)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter().map(|(x, y)| cross_entropy(self.logit(x), target(*y))).sum::<f64>() / data.len() as f64
    }

    /// Mean cross-entropy and its analytic gradient.
    pub fn loss_and_gradient(&self, data: &[(SparseCounts, Label)]) -> (f64, Gradient) {
        let mut grad = Gradient { weights: vec![0.0; self.weights.len()], bias: 0.0 };
        if data.is_empty() {
            return (0.0, grad);
        }
        let n = data.len() as f64;
        let mut loss = 0.0;
        for (x, y) in data {
            let z = self.logit(x);
            let y = target(*y);
            loss += cross_entropy(z, y);
            let dz = (sigmoid(z) - y) / n;
            grad.bias += dz;
            for &(i, c) in x {
                grad.weights[i] += dz * c;
            }
        }
        (loss / n, grad)
    }

    pub fn from_snapshot(snapshot: &Snapshot) -> Result<Self, BackendError> {
        if snapshot.backend_id != REFERENCE_BACKEND_ID {
            return Err(BackendError::new(format!(
                "checkpoint belongs to backend {:?}, not {REFERENCE_BACKEND_ID:?}",
                snapshot.backend_id
            )));
        }
        let model: LogisticModel = serde_json::from_value(snapshot.payload.clone())
            .map_err(|e| BackendError::new(format!("malformed reference checkpoint: {e}")))?;
        if model.weights.len() != model.vocab.len() {
            return Err(BackendError::new("checkpoint weight count does not match vocabulary"));
        }
        Ok(model)
    }
}

/// Reference [`TrainerBackend`]. Weights start at zero; each `fit_epoch` is a
/// single full-batch gradient step of size `lr`.
///
/// The step size is the backend's own: optimiser fields of [`TrainConfig`]
/// (learning rate, clipping, warmup) target real adapter backends.
#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    vocab_size: usize,
    lr: f64,
    seed: u64,
    model: Option<LogisticModel>,
}

pub fn reference_backend(vocab_size: usize, lr: f64, seed: u64) -> Result<ReferenceBackend, BackendError> {
    if vocab_size < 2 {
        return Err(BackendError::new(format!("vocab_size must be ≥ 2, got {vocab_size}")));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(BackendError::new(format!("learning rate must be positive, got {lr}")));
    }
    Ok(ReferenceBackend { vocab_size, lr, seed, model: None })
}

impl ReferenceBackend {
    pub fn model(&self) -> Option<&LogisticModel> {
        self.model.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn model_or_err(&self) -> Result<&LogisticModel, BackendError> {
        self.model
            .as_ref()
            .ok_or_else(|| BackendError::new("reference backend used before prepare()"))
    }

    fn featurize(&self, model: &LogisticModel, data: &[TrainExample]) -> Vec<(SparseCounts, Label)> {
        data.iter().map(|ex| (featurize_bow(&ex.text, &model.vocab), ex.label)).collect()
    }
}

impl TrainerBackend for ReferenceBackend {
    fn id(&self) -> &str {
        REFERENCE_BACKEND_ID
    }

    fn prepare(&mut self, train: &[TrainExample], _cfg: &TrainConfig) -> Result<(), BackendError> {
        let vocab = Vocabulary::top_k(train.iter().map(|e| e.text.as_str()), self.vocab_size);
        self.model = Some(LogisticModel::zeros(vocab));
        Ok(())
    }

    fn fit_epoch(&mut self, batches: &[&[TrainExample]], _cfg: &TrainConfig) -> Result<f64, BackendError> {
        let model = self.model_or_err()?;
        let data: Vec<(SparseCounts, Label)> =
            batches.iter().flat_map(|b| self.featurize(model, b)).collect();
        if data.is_empty() {
            return Err(BackendError::new("empty training epoch"));
        }
        let (loss, grad) = model.loss_and_gradient(&data);
        let lr = self.lr;
        let model = self.model.as_mut().unwrap();
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * g;
        }
        model.bias -= lr * grad.bias;
        Ok(loss)
    }

    fn evaluate(&self, val: &[TrainExample]) -> Result<f64, BackendError> {
        let model = self.model_or_err()?;
        Ok(model.loss(&self.featurize(model, val)))
    }

    fn snapshot(&self) -> Result<Snapshot, BackendError> {
        let model = self.model_or_err()?;
        Ok(Snapshot {
            backend_id: REFERENCE_BACKEND_ID.to_string(),
            payload: serde_json::to_value(model).expect("model serializes"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::new(tokens.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn featurize_counts_in_vocab_tokens() {
        let v = vocab(&["sad", "day"]);
        assert_eq!(featurize_bow("sad sad day", &v), vec![(0, 2.0), (1, 1.0)]);
        assert!(featurize_bow("", &v).is_empty());
        assert_eq!(featurize_bow("Sad SAD", &vocab(&["sad"])), vec![(0, 2.0)]);
        assert!(featurize_bow("happy", &v).is_empty());
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn top_k_breaks_ties_lexicographically() {
        let v = Vocabulary::top_k(["b a c", "c b", "d"], 3);
        assert_eq!(v.tokens(), ["b", "c", "a"]);
    }

    #[test]
    fn zero_weights_give_ln2() {
        let model = LogisticModel::zeros(vocab(&["sad", "happy"]));
        let data = vec![(vec![(0, 1.0)], Label::Depressed), (vec![(1, 1.0)], Label::NonDepressed)];
        assert!((model.loss(&data) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((model.loss(&data) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn exact_half_is_non_depressed() {
        let model = LogisticModel::zeros(vocab(&["x", "y"]));
        assert_eq!(model.probability("anything"), 0.5);
        assert_eq!(model.predict("anything"), Label::NonDepressed);
    }

    #[test]
    fn constructor_bounds() {
        assert!(reference_backend(1, 0.1, 0).is_err());
        assert!(reference_backend(2, 0.0, 0).is_err());
        assert!(reference_backend(2, 0.1, 0).is_ok());
    }

    #[test]
    fn cross_entropy_is_stable() {
        assert!(cross_entropy(800.0, 1.0).abs() < 1e-300);
        assert!((cross_entropy(-800.0, 1.0) - 800.0).abs() < 1e-9);
        assert!(cross_entropy(-800.0, 0.0).is_finite());
    }

    fn central_difference(model: &LogisticModel, data: &[(SparseCounts, Label)], h: f64) -> Gradient {
        let mut g = Gradient { weights: vec![0.0; model.weights.len()], bias: 0.0 };
        for i in 0..model.weights.len() {
            let mut plus = model.clone();
            plus.weights[i] += h;
            let mut minus = model.clone();
            minus.weights[i] -= h;
            g.weights[i] = (plus.loss(data) - minus.loss(data)) / (2.0 * h);
        }
        let mut plus = model.clone();
        plus.bias += h;
        let mut minus = model.clone();
        minus.bias -= h;
        g.bias = (plus.loss(data) - minus.loss(data)) / (2.0 * h);
        g
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = vocab(&["a", "b", "c", "d", "e", "f"]);
        let data: Vec<(SparseCounts, Label)> = (0..40)
            .map(|i| {
                let x = (0..6).map(|j| (j, rng.gen_range(1..4) as f64)).collect();
                (x, if i % 3 == 0 { Label::Depressed } else { Label::NonDepressed })
            })
            .collect();
        for _ in 0..5 {
            let mut model = LogisticModel::zeros(v.clone());
            model.weights.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
            model.bias = rng.gen_range(-0.5..0.5);
            let (_, analytic) = model.loss_and_gradient(&data);
            let numeric = central_difference(&model, &data, 1e-5);
            for (a, n) in analytic.weights.iter().chain([&analytic.bias]).zip(numeric.weights.iter().chain([&numeric.bias])) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
                assert!(rel < 1e-5, "analytic {a} numeric {n} rel {rel}");
            }
        }
    }

    #[test]
    fn single_example_converges() {
        let mut backend = reference_backend(4, 0.5, 0).unwrap();
        let ex = vec![TrainExample { text: "so sad and tired".into(), label: Label::Depressed }];
        let cfg = TrainConfig::default();
        backend.prepare(&ex, &cfg).unwrap();
        let mut losses = Vec::new();
        for _ in 0..50 {
            losses.push(backend.fit_epoch(&[&ex], &cfg).unwrap());
        }
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
        assert!(backend.evaluate(&ex).unwrap() < 0.01);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut backend = reference_backend(8, 0.5, 0).unwrap();
        let ex = vec![
            TrainExample { text: "sad".into(), label: Label::Depressed },
            TrainExample { text: "happy".into(), label: Label::NonDepressed },
        ];
        let cfg = TrainConfig::default();
        backend.prepare(&ex, &cfg).unwrap();
        backend.fit_epoch(&[&ex], &cfg).unwrap();
        let snap = backend.snapshot().unwrap();
        let json = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        let model = LogisticModel::from_snapshot(&back).unwrap();
        assert_eq!(&model, backend.model().unwrap());
        assert_eq!(model.predict("sad"), Label::Depressed);
    }
}
