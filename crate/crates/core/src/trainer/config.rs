use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    None,
    All,
    LoraOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskType {
    #[serde(rename = "CAUSAL_LM")]
    CausalLm,
}

/// Per-epoch cadence; the only supported value for eval / save / logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalStrategy {
    Epoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedulerType {
    Constant,
}

/// Low-rank adapter settings. Defaults are the values used for the LLaMA2-7B
/// run: alpha 128, dropout 0, rank 64, no bias, causal-LM task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub lora_alpha: f64,
    pub lora_dropout: f64,
    pub r: u32,
    pub bias: Bias,
    pub task_type: TaskType,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            lora_alpha: 128.0,
            lora_dropout: 0.0,
            r: 64,
            bias: Bias::None,
            task_type: TaskType::CausalLm,
        }
    }
}

/// Training-loop settings, keyed like the usual trainer arguments.
///
/// `optim`, `fp16`, `bf16` and `max_steps` are carried through for real
/// backends and manifests; the reference backend does not read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_train_epochs: u32,
    pub per_device_train_batch_size: u32,
    pub per_device_eval_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub eval_strategy: IntervalStrategy,
    pub logging_strategy: IntervalStrategy,
    pub save_strategy: IntervalStrategy,
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
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_train_epochs: 20,
            per_device_train_batch_size: 4,
            per_device_eval_batch_size: 4,
            gradient_accumulation_steps: 1,
            eval_strategy: IntervalStrategy::Epoch,
            logging_strategy: IntervalStrategy::Epoch,
            save_strategy: IntervalStrategy::Epoch,
            do_eval: true,
            optim: "paged_adamw_32bit".to_string(),
            learning_rate: 1e-4,
            weight_decay: 0.0,
            fp16: false,
            bf16: false,
            max_grad_norm: 0.3,
            max_steps: -1,
            warmup_ratio: 0.03,
            group_by_length: true,
            lr_scheduler_type: LrSchedulerType::Constant,
            seed: 42,
        }
    }
}

/// Every violated field, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid training configuration: {}", .violations.join("; "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

/// Check both configs and hand them back unchanged if every invariant holds.
pub fn validate_configs(
    lora: LoraConfig,
    train: TrainConfig,
) -> Result<(LoraConfig, TrainConfig), ConfigError> {
    let mut v = Vec::new();
    if !(lora.lora_alpha.is_finite() && lora.lora_alpha > 0.0) {
        v.push(format!("lora_alpha must be positive, got {}", lora.lora_alpha));
    }
    if !(0.0..=1.0).contains(&lora.lora_dropout) {
        v.push(format!("lora_dropout out of range [0, 1]: {}", lora.lora_dropout));
    }
    if lora.r < 1 {
        v.push("rank must be ≥ 1 (r = 0)".to_string());
    }
    let positive = [
        ("num_train_epochs", train.num_train_epochs),
        ("per_device_train_batch_size", train.per_device_train_batch_size),
        ("per_device_eval_batch_size", train.per_device_eval_batch_size),
        ("gradient_accumulation_steps", train.gradient_accumulation_steps),
    ];
    for (name, value) in positive {
        if value == 0 {
            v.push(format!("{name} must be ≥ 1"));
        }
    }
    if !(train.learning_rate.is_finite() && train.learning_rate > 0.0) {
        v.push(format!("learning_rate must be positive, got {}", train.learning_rate));
    }
    if !(train.weight_decay.is_finite() && train.weight_decay >= 0.0) {
        v.push(format!("weight_decay must be non-negative, got {}", train.weight_decay));
    }
    if !(train.max_grad_norm.is_finite() && train.max_grad_norm > 0.0) {
        v.push(format!("max_grad_norm must be positive, got {}", train.max_grad_norm));
    }
    if !(0.0..1.0).contains(&train.warmup_ratio) {
        v.push(format!("warmup_ratio out of range [0, 1): {}", train.warmup_ratio));
    }
    if train.max_steps < -1 || train.max_steps == 0 {
        v.push(format!("max_steps must be -1 or positive, got {}", train.max_steps));
    }
    if v.is_empty() {
        Ok((lora, train))
    } else {
        Err(ConfigError { violations: v })
    }
}
