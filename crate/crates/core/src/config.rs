//! Flat key/value settings shared by every CLI subcommand.
//!
//! Layers apply in order: built-in defaults, a TOML file, `DEPSCREEN_<KEY>`
//! environment variables (known keys only), then explicit overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{SplitRatios, TimeWindow};
use crate::hosted::{HostedHyperparams, DEFAULT_API_BASE, DEFAULT_BASE_MODEL};
use crate::infer::HostedInferOptions;
use crate::trainer::{Bias, IntervalStrategy, LrSchedulerType, TaskType};
use crate::trainer::DEFAULT_VOCAB_SIZE;
use crate::trainer::{LoraConfig, TrainConfig};

pub const ENV_PREFIX: &str = "DEPSCREEN_";
pub const DEFAULT_REFERENCE_LR: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("unknown setting {0:?}")]
    UnknownKey(String),
    #[error("setting {key} from {origin}: {message}")]
    Value { key: String, origin: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    // Local trainer.
    pub num_train_epochs: u32,
    pub per_device_train_batch_size: u32,
    pub per_device_eval_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub do_eval: bool,
    pub optim: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub fp16: bool,
    pub bf16: bool,
    pub max_grad_norm: f64,
    pub max_steps: i64,
    pub warmup_ratio: f64,
    pub group_by_length: bool,
    pub lr_scheduler_type: LrSchedulerType,
    pub seed: u64,
    pub lora_alpha: f64,
    pub lora_dropout: f64,
    pub lora_r: u32,
    pub lora_bias: Bias,
    pub vocab_size: usize,
    pub reference_lr: f64,

    // Hosted provider.
    pub api_base: String,
    pub base_model: String,
    pub hosted_n_epochs: u32,
    pub hosted_batch_size: u32,
    pub hosted_learning_rate_multiplier: f64,
    pub request_timeout_s: f64,
    pub max_retries: u32,
    pub poll_interval_s: f64,
    pub poll_deadline_s: f64,

    // Inference.
    pub infer_concurrency: usize,
    /// Requests per second; 0 disables the ceiling.
    pub infer_max_rps: f64,

    // Corpus.
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub split_ratios: String,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let l = LoraConfig::default();
        let h = HostedHyperparams::default();
        let w = TimeWindow::december_2016();
        let r = SplitRatios::default();
        Settings {
            num_train_epochs: t.num_train_epochs,
            per_device_train_batch_size: t.per_device_train_batch_size,
            per_device_eval_batch_size: t.per_device_eval_batch_size,
            gradient_accumulation_steps: t.gradient_accumulation_steps,
            do_eval: t.do_eval,
            optim: t.optim,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            fp16: t.fp16,
            bf16: t.bf16,
            max_grad_norm: t.max_grad_norm,
            max_steps: t.max_steps,
            warmup_ratio: t.warmup_ratio,
            group_by_length: t.group_by_length,
            lr_scheduler_type: t.lr_scheduler_type,
            seed: t.seed,
            lora_alpha: l.lora_alpha,
            lora_dropout: l.lora_dropout,
            lora_r: l.r,
            lora_bias: l.bias,
            vocab_size: DEFAULT_VOCAB_SIZE,
            reference_lr: DEFAULT_REFERENCE_LR,
            api_base: DEFAULT_API_BASE.into(),
            base_model: DEFAULT_BASE_MODEL.into(),
            hosted_n_epochs: h.n_epochs,
            hosted_batch_size: h.batch_size,
            hosted_learning_rate_multiplier: h.learning_rate_multiplier,
            request_timeout_s: 60.0,
            max_retries: 3,
            poll_interval_s: 10.0,
            poll_deadline_s: 3600.0,
            infer_concurrency: 4,
            infer_max_rps: 0.0,
            window_start: w.start,
            window_end: w.end,
            split_ratios: format!("{},{},{}", r.train, r.val, r.test),
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    // Bare words (model names, URLs) are taken as strings.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl Settings {
    pub fn keys() -> Vec<String> {
        Self::default().to_table().keys().cloned().collect()
    }

    fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("settings serialize to a table")
    }

    fn from_table(table: toml::Table, key: &str, origin: &str) -> Result<Self, SettingsError> {
        Settings::deserialize(toml::Value::Table(table)).map_err(|e| SettingsError::Value {
            key: key.to_string(),
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_toml_str(src: &str, path: &Path) -> Result<Self, SettingsError> {
        toml::from_str(src).map_err(|e| SettingsError::File { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn from_file(path: &Path) -> Result<Self, SettingsError> {
        let src = fs::read_to_string(path)
            .map_err(|e| SettingsError::File { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml_str(&src, path)
    }

    /// Override one key from its textual form. `origin` is used in errors.
    pub fn set(&mut self, key: &str, raw: &str, origin: &str) -> Result<(), SettingsError> {
        let mut table = self.to_table();
        let Some(slot) = table.get_mut(key) else {
            return Err(SettingsError::UnknownKey(key.to_string()));
        };
        let mut value = parse_scalar(raw);
        // Keep strings as strings even when they look like numbers.
        if slot.is_str() && !value.is_str() {
            value = toml::Value::String(raw.to_string());
        }
        if slot.is_float() {
            if let toml::Value::Integer(i) = value {
                value = toml::Value::Float(i as f64);
            }
        }
        *slot = value;
        *self = Self::from_table(table, key, origin)?;
        Ok(())
    }

    /// Apply `DEPSCREEN_<KEY>` variables for known keys; others are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), SettingsError> {
        let known = Self::keys();
        let mut env: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in vars {
            if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
                let key = rest.to_ascii_lowercase();
                if known.contains(&key) {
                    env.insert(key, v);
                }
            }
        }
        for (k, v) in env {
            self.set(&k, &v, &format!("{ENV_PREFIX}{}", k.to_ascii_uppercase()))?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the environment.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, SettingsError> {
        let mut s = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        s.apply_env(vars)?;
        Ok(s)
    }

    /// Every key with its effective value, in key order.
    pub fn snapshot(&self) -> BTreeMap<String, serde_json::Value> {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| serde_json::from_value(v).ok())
            .unwrap_or_default()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            num_train_epochs: self.num_train_epochs,
            per_device_train_batch_size: self.per_device_train_batch_size,
            per_device_eval_batch_size: self.per_device_eval_batch_size,
            gradient_accumulation_steps: self.gradient_accumulation_steps,
            eval_strategy: IntervalStrategy::Epoch,
            logging_strategy: IntervalStrategy::Epoch,
            save_strategy: IntervalStrategy::Epoch,
            do_eval: self.do_eval,
            optim: self.optim.clone(),
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            fp16: self.fp16,
            bf16: self.bf16,
            max_grad_norm: self.max_grad_norm,
            max_steps: self.max_steps,
            warmup_ratio: self.warmup_ratio,
            group_by_length: self.group_by_length,
            lr_scheduler_type: self.lr_scheduler_type,
            seed: self.seed,
        }
    }

    pub fn lora_config(&self) -> LoraConfig {
        LoraConfig {
            lora_alpha: self.lora_alpha,
            lora_dropout: self.lora_dropout,
            r: self.lora_r,
            bias: self.lora_bias,
            task_type: TaskType::CausalLm,
        }
    }

    pub fn hosted_hyperparams(&self) -> HostedHyperparams {
        HostedHyperparams {
            n_epochs: self.hosted_n_epochs,
            batch_size: self.hosted_batch_size,
            learning_rate_multiplier: self.hosted_learning_rate_multiplier,
        }
    }

    pub fn infer_options(&self) -> HostedInferOptions {
        HostedInferOptions {
            concurrency: self.infer_concurrency.max(1),
            max_requests_per_second: (self.infer_max_rps > 0.0).then_some(self.infer_max_rps),
        }
    }

    pub fn window(&self) -> Result<TimeWindow, crate::corpus::CorpusError> {
        TimeWindow::new(self.window_start, self.window_end)
    }

    pub fn ratios(&self) -> Result<SplitRatios, crate::corpus::CorpusError> {
        self.split_ratios.parse()
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_s.max(0.001))
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::from_secs_f64(self.poll_interval_s.max(0.0))
    }

    pub fn poll_deadline(&self) -> Duration {
        Duration::from_secs_f64(self.poll_deadline_s.max(0.0))
    }
}
