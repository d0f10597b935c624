//! Toolkit for curating a labeled depression-detection corpus from social-media
//! posts, orchestrating supervised fine-tuning (a local adapter-style trainer and
//! a hosted fine-tuning provider client), running inference, and evaluating
//! binary classifiers.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: text normalisation, anchor-tweet labeling rules, emoji
//!   sentiment annotation, stratified splitting and chat-format export.
//! - [`trainer`]: training configurations, the epoch loop, checkpoints and loss
//!   curves, plus a deterministic bag-of-words reference backend.
//! - [`hosted`]: client for a hosted fine-tuning provider and an in-process /
//!   standalone mock of that provider.
//! - [`infer`]: prompt rendering, free-text label parsing and batch prediction.
//! - [`evalsuite`]: confusion matrices, precision / recall / F1 / accuracy and
//!   comparative report rendering.
//! - [`config`]: the flat key-value configuration document shared by the CLI.

pub mod config;
pub mod corpus;
pub mod evalsuite;
pub mod hosted;
pub mod infer;
mod label;
pub mod synth;
pub mod trainer;
mod util;

pub use label::{Label, ParseLabelError};
pub use util::{sha256_hex, write_atomic};

pub use corpus::{LabeledCorpus, LabeledExample, Post, UserRecord};
pub use evalsuite::{ConfusionMatrix, MetricsReport};
pub use infer::{Prediction, PredictedLabel, PromptTemplate};
pub use trainer::{EpochMetrics, LoraConfig, ModelHandle, TrainConfig};
