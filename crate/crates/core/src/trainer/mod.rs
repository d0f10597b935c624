//! Training configurations, the epoch loop and loss-curve export.

mod checkpoint;
mod config;
mod loss_csv;
mod reference;
mod scripted;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, Split};
use crate::{util, Label};

pub use checkpoint::{CheckpointError, CheckpointStore, DirCheckpoints, MemoryCheckpoints};
pub use config::{
    validate_configs, Bias, ConfigError, IntervalStrategy, LoraConfig, LrSchedulerType, TaskType,
    TrainConfig,
};
pub use loss_csv::{export_loss_csv, format_loss, read_loss_csv, render_loss_csv, LossCsvError};
pub use reference::{
    featurize_bow, reference_backend, tokenize, Gradient, LogisticModel, ReferenceBackend,
    SparseCounts, Vocabulary, DEFAULT_VOCAB_SIZE, REFERENCE_BACKEND_ID,
};
pub use scripted::ScriptedBackend;

/// Text and gold label as seen by a backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BackendError(pub String);

impl BackendError {
    pub fn new(msg: impl Into<String>) -> Self {
        BackendError(msg.into())
    }
}

/// Serialised model state produced after an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub backend_id: String,
    pub payload: serde_json::Value,
}

/// Something that can be fine-tuned one epoch at a time.
///
/// Implementations must be deterministic for a fixed seed, and `evaluate`
/// must not touch trainable state (it takes `&self`).
pub trait TrainerBackend {
    fn id(&self) -> &str;

    /// Called once with the full training split before the first epoch.
    fn prepare(&mut self, _train: &[TrainExample], _cfg: &TrainConfig) -> Result<(), BackendError> {
        Ok(())
    }

    /// Train for one epoch over `batches` and report the epoch's training loss.
    fn fit_epoch(&mut self, batches: &[&[TrainExample]], cfg: &TrainConfig) -> Result<f64, BackendError>;

    /// Mean loss on `val`.
    fn evaluate(&self, val: &[TrainExample]) -> Result<f64, BackendError>;

    /// Loss over the entire validation split, computed once after training.
    fn full_validation(&self, val: &[TrainExample]) -> Result<f64, BackendError> {
        self.evaluate(val)
    }

    fn snapshot(&self) -> Result<Snapshot, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_time_s: f64,
}

/// Reference to a trained model: which backend, which checkpoint, and a
/// fingerprint of the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub backend_id: String,
    pub checkpoint_ref: String,
    pub config_fingerprint: String,
}

/// SHA-256 over the canonical JSON of both configs (the seed is part of
/// [`TrainConfig`]).
pub fn config_fingerprint(lora: &LoraConfig, cfg: &TrainConfig) -> String {
    let canonical = serde_json::to_string(&(lora, cfg)).expect("configs serialize");
    util::sha256_hex(canonical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub epoch: u32,
    pub reference: String,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub handle: ModelHandle,
    pub metrics: Vec<EpochMetrics>,
    pub full_val_loss: f64,
    pub checkpoints: Vec<CheckpointRecord>,
}

impl TrainRun {
    /// Checkpoint with the lowest per-epoch validation loss (earliest on ties).
    pub fn best_checkpoint(&self) -> Option<&CheckpointRecord> {
        self.checkpoints
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss).then(a.epoch.cmp(&b.epoch)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus has no {0} examples")]
    EmptySplit(Split),
    #[error("corpus has not been split")]
    Unsplit,
    #[error("backend failed during preparation: {0}")]
    Prepare(BackendError),
    /// The run stopped in `epoch`; `partial` holds every completed epoch.
    #[error("backend failed in epoch {epoch}: {source}")]
    Backend { epoch: u32, partial: Vec<EpochMetrics>, source: BackendError },
    #[error("epoch {epoch}: {source}")]
    Checkpoint { epoch: u32, partial: Vec<EpochMetrics>, source: CheckpointError },
}

impl TrainError {
    pub fn partial_metrics(&self) -> &[EpochMetrics] {
        match self {
            TrainError::Backend { partial, .. } | TrainError::Checkpoint { partial, .. } => partial,
            _ => &[],
        }
    }
}

fn split_examples(corpus: &LabeledCorpus, split: Split) -> Vec<TrainExample> {
    corpus
        .examples_in(split)
        .map(|ex| TrainExample { text: ex.normalized_text.clone(), label: ex.label })
        .collect()
}

/// Batch order for one epoch: a seeded shuffle, and with `group_by_length`
/// examples of similar token length are batched together before the batch
/// order itself is shuffled.
fn epoch_batches(train: &[TrainExample], cfg: &TrainConfig, epoch: u32) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ u64::from(epoch).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    if cfg.group_by_length {
        order.sort_by_key(|&i| train[i].text.split_whitespace().count());
    }
    let mut batches: Vec<Vec<usize>> = order
        .chunks(cfg.per_device_train_batch_size as usize)
        .map(<[usize]>::to_vec)
        .collect();
    if cfg.group_by_length {
        batches.shuffle(&mut rng);
    }
    batches
}

/// Run `cfg.num_train_epochs` epochs: fit, evaluate on VAL, checkpoint. After
/// the last epoch the full validation loss is computed once.
pub fn train(
    backend: &mut dyn TrainerBackend,
    corpus: &LabeledCorpus,
    lora: &LoraConfig,
    cfg: &TrainConfig,
    store: &mut dyn CheckpointStore,
) -> Result<TrainRun, TrainError> {
    let (lora, cfg) = validate_configs(lora.clone(), cfg.clone())?;
    if !corpus.is_split() {
        return Err(TrainError::Unsplit);
    }
    let train_set = split_examples(corpus, Split::Train);
    let val_set = split_examples(corpus, Split::Val);
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit(Split::Val));
    }
    backend.prepare(&train_set, &cfg).map_err(TrainError::Prepare)?;

    let fingerprint = config_fingerprint(&lora, &cfg);
    let mut metrics: Vec<EpochMetrics> = Vec::with_capacity(cfg.num_train_epochs as usize);
    let mut checkpoints = Vec::with_capacity(cfg.num_train_epochs as usize);
    for epoch in 1..=cfg.num_train_epochs {
        let started = Instant::now();
        let order = epoch_batches(&train_set, &cfg, epoch);
        let owned: Vec<Vec<TrainExample>> = order
            .iter()
            .map(|b| b.iter().map(|&i| train_set[i].clone()).collect())
            .collect();
        let batches: Vec<&[TrainExample]> = owned.iter().map(Vec::as_slice).collect();
        let fail = |source: BackendError, partial: &Vec<EpochMetrics>| TrainError::Backend {
            epoch,
            partial: partial.clone(),
            source,
        };
        let train_loss = backend.fit_epoch(&batches, &cfg).map_err(|e| fail(e, &metrics))?;
        let val_loss = backend.evaluate(&val_set).map_err(|e| fail(e, &metrics))?;
        for (name, v) in [("training", train_loss), ("validation", val_loss)] {
            if !v.is_finite() || v < 0.0 {
                return Err(fail(BackendError::new(format!("{name} loss is {v}")), &metrics));
            }
        }
        let snapshot = backend.snapshot().map_err(|e| fail(e, &metrics))?;
        let reference = store.save(epoch, &snapshot).map_err(|source| TrainError::Checkpoint {
            epoch,
            partial: metrics.clone(),
            source,
        })?;
        log::info!("epoch {epoch}: train_loss={train_loss:.6} val_loss={val_loss:.6}");
        checkpoints.push(CheckpointRecord { epoch, reference, val_loss });
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            val_loss,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    let full_val_loss = backend.full_validation(&val_set).map_err(|source| TrainError::Backend {
        epoch: cfg.num_train_epochs,
        partial: metrics.clone(),
        source,
    })?;
    let last = checkpoints.last().expect("at least one epoch").reference.clone();
    Ok(TrainRun {
        handle: ModelHandle {
            backend_id: backend.id().to_string(),
            checkpoint_ref: last,
            config_fingerprint: fingerprint,
        },
        metrics,
        full_val_loss,
        checkpoints,
    })
}
