use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use depscreen::config::Settings;
use depscreen::corpus::{
    build_corpus, export_chat_jsonl, group_users, read_corpus, read_posts, split_corpus, write_corpus, AnchorRuleSet,
    EmojiSentimentLibrary, LabeledCorpus, Split,
};
use depscreen::evalsuite::{evaluate_predictions, read_reports, render_report, ReportFormat, UnscoredPolicy};
use depscreen::hosted::{
    Credential, HostedClient, MockProvider, MockScript, MockServer, ProviderEndpoint, ENV_API_KEY,
};
use depscreen::infer::{predict_batch, read_predictions, write_predictions, PredictedLabel, Predictor};
use depscreen::trainer::{
    export_loss_csv, read_loss_csv, reference_backend, train, validate_configs, DirCheckpoints, LogisticModel,
    TrainError,
};
use depscreen::{write_atomic, Label, ModelHandle, Post, PromptTemplate};

use crate::error::CliError;
use crate::manifest::{self, Plan, Request, Run, RunManifest};
use crate::{Cli, Command, GlobalArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut settings = load_settings(&cli.global)?;
    let out = cli.global.out_dir.clone();
    match cli.command {
        Command::Curate(a) => curate(&mut settings, &out, a),
        Command::Export(a) => export(&mut settings, &out, a),
        Command::Train(a) => train_cmd(&mut settings, &out, a),
        Command::FinetuneHosted(a) => finetune(&mut settings, &out, a),
        Command::Predict(a) => predict(&mut settings, &out, a),
        Command::Evaluate(a) => evaluate(&mut settings, &out, a),
        Command::Report(a) => report(&mut settings, &out, a),
        Command::MockProvider(a) => mock_provider(a),
    }
}

fn load_settings(g: &GlobalArgs) -> Result<Settings, CliError> {
    let mut s = Settings::load(g.config.as_deref(), std::env::vars())?;
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        s.set(k.trim(), v.trim(), "--set")?;
    }
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn flag<T: ToString>(s: &mut Settings, key: &str, value: &Option<T>, name: &str) -> Result<(), CliError> {
    if let Some(v) = value {
        s.set(key, &v.to_string(), name)?;
    }
    Ok(())
}

fn args<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn credential() -> Result<Credential, CliError> {
    std::env::var(ENV_API_KEY)
        .ok()
        .filter(|k| !k.trim().is_empty())
        .map(Credential::new)
        .ok_or_else(|| CliError::usage(format!("{ENV_API_KEY} is not set; the hosted provider needs a credential")))
}

fn hosted_client(s: &Settings) -> Result<HostedClient, CliError> {
    let mut endpoint = ProviderEndpoint::new(s.api_base.clone(), credential()?);
    endpoint.timeout = s.request_timeout();
    endpoint.max_retries = s.max_retries;
    Ok(HostedClient::new(endpoint))
}

fn load_template(path: &Option<PathBuf>) -> Result<PromptTemplate, CliError> {
    let t = match path {
        None => PromptTemplate::default(),
        Some(p) => {
            let src = fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
            serde_json::from_str(&src).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
    };
    t.validate()?;
    Ok(t)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(value).expect("serializable");
    json.push(b'\n');
    write_atomic(path, &json).map_err(|e| CliError::io(path.display(), e))
}

fn start(req: Request<'_>) -> Result<Option<Run>, CliError> {
    match manifest::plan(req)? {
        Plan::UpToDate(m) => {
            println!("{}", manifest::describe(&m));
            Ok(None)
        }
        Plan::Run(run) => Ok(Some(run)),
    }
}

/// Run `body`, then finalize the manifest with the returned artifacts, or
/// mark it failed.
fn execute(
    mut run: Run,
    body: impl FnOnce(&mut Run) -> Result<Vec<PathBuf>, CliError>,
) -> Result<RunManifest, CliError> {
    match body(&mut run) {
        Ok(artifacts) => run.finish(&artifacts),
        Err(e) => {
            if let Err(save) = run.fail(&e) {
                log::error!("could not record failure in manifest: {save}");
            }
            Err(e)
        }
    }
}

fn split_posts(corpus: &LabeledCorpus, split: Split) -> Result<(Vec<Post>, HashMap<String, Label>), CliError> {
    if !corpus.is_split() {
        return Err(CliError::usage("corpus has not been split; run `curate` first"));
    }
    let examples: Vec<_> = corpus.examples_in(split).collect();
    if examples.is_empty() {
        return Err(CliError::usage(format!("split {split} is empty")));
    }
    Ok((
        examples.iter().map(|e| e.post.clone()).collect(),
        examples.iter().map(|e| (e.post.id.clone(), e.label)).collect(),
    ))
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    s.parse().map_err(|e: depscreen::corpus::CorpusError| CliError::usage(e.to_string()))
}

// ---------------------------------------------------------------- curate

#[derive(Args, Debug)]
pub struct CurateArgs {
    /// Posts file: JSON lines with id, author_id, created_at, text and an
    /// optional human label for candidate posts.
    #[arg(long)]
    pub posts: PathBuf,
    /// Emoji sentiment library (TSV: emoji, polarity). Built-in table if absent.
    #[arg(long, value_name = "PATH")]
    pub emoji_lib: Option<PathBuf>,
    /// Additional self-reported diagnosis phrase. Repeatable.
    #[arg(long = "diagnosis-pattern", value_name = "PHRASE")]
    pub diagnosis_patterns: Vec<String>,
    /// Split ratios as train,val,test.
    #[arg(long, value_name = "R,R,R")]
    pub split_ratios: Option<String>,
}

#[derive(Serialize)]
struct CurateSummary<'a> {
    #[serde(flatten)]
    stats: &'a depscreen::corpus::BuildStats,
    class_counts: BTreeMap<Label, usize>,
    split_counts: BTreeMap<Split, BTreeMap<Label, usize>>,
}

fn curate(s: &mut Settings, out: &Path, a: CurateArgs) -> Result<(), CliError> {
    flag(s, "split_ratios", &a.split_ratios, "--split-ratios")?;
    let ratios = s.ratios()?;
    let window = s.window()?;
    let rules = AnchorRuleSet::with_extra_patterns(&a.diagnosis_patterns);
    rules.validate()?;
    let mut inputs = vec![a.posts.clone()];
    inputs.extend(a.emoji_lib.clone());
    let Some(run) = start(Request {
        out_dir: out,
        command: "curate",
        config: s.snapshot(),
        arguments: args([
            ("posts", a.posts.display().to_string()),
            ("emoji_lib", opt_path(&a.emoji_lib)),
            ("diagnosis_patterns", a.diagnosis_patterns.join("|")),
        ]),
        inputs,
        force: false,
    })?
    else {
        return Ok(());
    };
    let seed = s.seed;
    execute(run, |run| {
        let posts = read_posts(&a.posts)?;
        let lib = match &a.emoji_lib {
            Some(p) => EmojiSentimentLibrary::load(p)?,
            None => EmojiSentimentLibrary::builtin(),
        };
        let build = build_corpus(group_users(posts.posts), &rules, &window, &lib, &posts.human_labels)?;
        let corpus = split_corpus(build.corpus, ratios, seed)?;
        ensure_dir(out)?;
        let corpus_path = out.join("corpus.jsonl");
        write_corpus(&corpus, &corpus_path)?;
        let queue_path = out.join("review_queue.jsonl");
        let mut queue = String::new();
        for item in &build.review_queue {
            queue.push_str(&serde_json::to_string(item).expect("serializable"));
            queue.push('\n');
        }
        write_atomic(&queue_path, queue.as_bytes()).map_err(|e| CliError::io(queue_path.display(), e))?;
        let stats_path = out.join("curate_stats.json");
        let summary =
            CurateSummary { stats: &build.stats, class_counts: corpus.class_counts(), split_counts: corpus.split_counts() };
        write_json(&stats_path, &summary)?;
        let st = &build.stats;
        println!(
            "curated {} posts: {} D1, {} D2, {} D3 labeled, {} D3 awaiting review, {} unlabeled",
            st.posts_seen, st.d1, st.d2, st.d3_reviewed, st.d3_pending, st.unlabeled
        );
        for (split, counts) in corpus.split_counts() {
            let d = counts.get(&Label::Depressed).copied().unwrap_or(0);
            let n = counts.get(&Label::NonDepressed).copied().unwrap_or(0);
            println!("  {split}: {d} depressed, {n} non-depressed");
        }
        println!("corpus written to {}", corpus_path.display());
        run.output("stats", &build.stats);
        Ok(vec![corpus_path.clone(), depscreen::corpus::meta_path(&corpus_path), queue_path, stats_path])
    })?;
    Ok(())
}

// ---------------------------------------------------------------- export

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Curated corpus. Defaults to `<out-dir>/corpus.jsonl`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Split to export (train, val or test).
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Output file. Defaults to `<out-dir>/<split>.chat.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Prompt template as JSON (system_instruction, user_wrapper,
    /// positive_keyword, negative_keyword).
    #[arg(long)]
    pub template: Option<PathBuf>,
}

fn export(s: &mut Settings, out: &Path, a: ExportArgs) -> Result<(), CliError> {
    let split = parse_split(&a.split)?;
    let template = load_template(&a.template)?;
    let corpus_path = a.corpus.clone().unwrap_or_else(|| out.join("corpus.jsonl"));
    let output = a.output.clone().unwrap_or_else(|| out.join(format!("{}.chat.jsonl", split.as_str().to_lowercase())));
    let mut inputs = vec![corpus_path.clone()];
    inputs.extend(a.template.clone());
    let Some(run) = start(Request {
        out_dir: out,
        command: "export",
        config: s.snapshot(),
        arguments: args([
            ("corpus", corpus_path.display().to_string()),
            ("split", split.to_string()),
            ("output", output.display().to_string()),
        ]),
        inputs,
        force: false,
    })?
    else {
        return Ok(());
    };
    execute(run, |run| {
        let corpus = read_corpus(&corpus_path)?;
        if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
            ensure_dir(dir)?;
        }
        let summary = export_chat_jsonl(&corpus, split, &template, &output)?;
        println!("wrote {} {split} records to {} ({} skipped as empty)", summary.written, output.display(), summary.skipped_empty);
        run.output("written", summary.written);
        Ok(vec![output.clone()])
    })?;
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Curated corpus. Defaults to `<out-dir>/corpus.jsonl`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lora_r: Option<u32>,
    #[arg(long)]
    pub lora_alpha: Option<f64>,
    #[arg(long)]
    pub lora_dropout: Option<f64>,
    /// Vocabulary size of the reference backend.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Step size of the reference backend.
    #[arg(long)]
    pub reference_lr: Option<f64>,
    /// Keep only the best-validation and final checkpoints.
    #[arg(long)]
    pub prune_to_best: bool,
}

/// Contents of `model.json`: how to find the trained model again.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub handle: ModelHandle,
    pub epochs: u32,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub full_val_loss: f64,
    pub best_epoch: u32,
    pub best_checkpoint: String,
}

fn train_cmd(s: &mut Settings, out: &Path, a: TrainArgs) -> Result<(), CliError> {
    flag(s, "num_train_epochs", &a.epochs, "--epochs")?;
    flag(s, "per_device_train_batch_size", &a.batch_size, "--batch-size")?;
    flag(s, "learning_rate", &a.learning_rate, "--learning-rate")?;
    flag(s, "lora_r", &a.lora_r, "--lora-r")?;
    flag(s, "lora_alpha", &a.lora_alpha, "--lora-alpha")?;
    flag(s, "lora_dropout", &a.lora_dropout, "--lora-dropout")?;
    flag(s, "vocab_size", &a.vocab_size, "--vocab-size")?;
    flag(s, "reference_lr", &a.reference_lr, "--reference-lr")?;
    let (lora, cfg) = validate_configs(s.lora_config(), s.train_config()).map_err(|e| CliError::usage(e.to_string()))?;
    let mut backend = reference_backend(s.vocab_size, s.reference_lr, cfg.seed)?;
    let corpus_path = a.corpus.clone().unwrap_or_else(|| out.join("corpus.jsonl"));
    let Some(run) = start(Request {
        out_dir: out,
        command: "train",
        config: s.snapshot(),
        arguments: args([
            ("corpus", corpus_path.display().to_string()),
            ("prune_to_best", a.prune_to_best.to_string()),
        ]),
        inputs: vec![corpus_path.clone()],
        force: false,
    })?
    else {
        return Ok(());
    };
    execute(run, |run| {
        let corpus = read_corpus(&corpus_path)?;
        let ckpt_dir = out.join("checkpoints");
        let mut store = DirCheckpoints::new(&ckpt_dir)?;
        let loss_path = out.join("loss.csv");
        let result = train(&mut backend, &corpus, &lora, &cfg, &mut store);
        let trained = match result {
            Ok(r) => r,
            Err(e) => {
                if let TrainError::Backend { partial, .. } = &e {
                    if !partial.is_empty() {
                        export_loss_csv(partial, &loss_path)?;
                        eprintln!("partial loss curve ({} epochs) written to {}", partial.len(), loss_path.display());
                    }
                }
                return Err(e.into());
            }
        };
        export_loss_csv(&trained.metrics, &loss_path)?;
        let best = trained.best_checkpoint().expect("at least one epoch").clone();
        let last = trained.metrics.last().expect("at least one epoch").clone();
        let keep: Vec<u32> = if a.prune_to_best {
            vec![best.epoch, last.epoch]
        } else {
            trained.metrics.iter().map(|m| m.epoch).collect()
        };
        store.prune_except(&keep)?;
        for m in &trained.metrics {
            log::info!("epoch {}: train_loss {:.6} val_loss {:.6}", m.epoch, m.train_loss, m.val_loss);
        }
        let info = ModelInfo {
            handle: trained.handle.clone(),
            epochs: last.epoch,
            final_train_loss: last.train_loss,
            final_val_loss: last.val_loss,
            full_val_loss: trained.full_val_loss,
            best_epoch: best.epoch,
            best_checkpoint: best.reference.clone(),
        };
        let model_path = out.join("model.json");
        write_json(&model_path, &info)?;
        println!(
            "trained {} epochs: train_loss {:.6} -> {:.6}, val_loss {:.6}, full validation {:.6}",
            last.epoch, trained.metrics[0].train_loss, last.train_loss, last.val_loss, trained.full_val_loss
        );
        println!("loss curve: {}; model: {}", loss_path.display(), model_path.display());
        run.output("model", &info);
        let mut artifacts = vec![loss_path.clone(), model_path];
        artifacts.extend(keep.iter().map(|e| store.path_for(*e)));
        artifacts.dedup();
        Ok(artifacts)
    })?;
    Ok(())
}

// ---------------------------------------------------------------- finetune-hosted

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    /// Chat-format training file. Defaults to `<out-dir>/train.chat.jsonl`.
    #[arg(long)]
    pub training_file: Option<PathBuf>,
    #[arg(long)]
    pub n_epochs: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<u32>,
    #[arg(long)]
    pub learning_rate_multiplier: Option<f64>,
    #[arg(long)]
    pub base_model: Option<String>,
    /// Seconds between status polls.
    #[arg(long)]
    pub poll_interval: Option<f64>,
    /// Give up polling after this many seconds (exit 3).
    #[arg(long)]
    pub deadline: Option<f64>,
    /// Create a new job even if one already completed for the same inputs.
    #[arg(long)]
    pub force: bool,
}

fn finetune(s: &mut Settings, out: &Path, a: FinetuneArgs) -> Result<(), CliError> {
    flag(s, "hosted_n_epochs", &a.n_epochs, "--n-epochs")?;
    flag(s, "hosted_batch_size", &a.batch_size, "--batch-size")?;
    flag(s, "hosted_learning_rate_multiplier", &a.learning_rate_multiplier, "--learning-rate-multiplier")?;
    flag(s, "base_model", &a.base_model, "--base-model")?;
    flag(s, "poll_interval_s", &a.poll_interval, "--poll-interval")?;
    flag(s, "poll_deadline_s", &a.deadline, "--deadline")?;
    let hp = s.hosted_hyperparams();
    hp.validate()?;
    let training_file = a.training_file.clone().unwrap_or_else(|| out.join("train.chat.jsonl"));
    let client = hosted_client(s)?;
    let Some(run) = start(Request {
        out_dir: out,
        command: "finetune-hosted",
        config: s.snapshot(),
        arguments: args([("training_file", training_file.display().to_string())]),
        inputs: vec![training_file.clone()],
        force: a.force,
    })?
    else {
        println!("pass --force to create another hosted job");
        return Ok(());
    };
    let (interval, deadline, base_model) = (s.poll_interval(), s.poll_deadline(), s.base_model.clone());
    execute(run, |run| {
        let file_id = client.upload_training_file(&training_file)?;
        run.output("training_file_id", &file_id);
        run.save()?;
        let job = client.create_job(&file_id, &hp, &base_model)?;
        println!(
            "created job {} on {} (n_epochs {}, batch_size {}, learning_rate_multiplier {})",
            job.job_id, job.base_model, job.hyperparams.n_epochs, job.hyperparams.batch_size,
            job.hyperparams.learning_rate_multiplier
        );
        run.output("job_id", &job.job_id);
        run.output("hyperparameters", job.hyperparams);
        run.save()?;
        let outcome = client.poll_job(&job.job_id, interval, deadline)?;
        let job_path = out.join("hosted_job.json");
        ensure_dir(out)?;
        write_json(&job_path, &outcome.job)?;
        run.output("status", outcome.job.status);
        let snapshot = serde_json::to_string(&outcome.job).expect("serializable");
        if outcome.timed_out {
            return Err(CliError::remote(format!(
                "job {} still {} after {:.0}s ({} polls); last snapshot: {snapshot}",
                job.job_id,
                outcome.job.status,
                deadline.as_secs_f64(),
                outcome.polls
            )));
        }
        let Some(model) = outcome.job.fine_tuned_model_id.clone().filter(|_| outcome.job.status.is_terminal()) else {
            return Err(CliError::remote(format!(
                "job {} ended {}: {}",
                job.job_id,
                outcome.job.status,
                outcome.job.error.clone().unwrap_or_else(|| "no error message".into())
            )));
        };
        println!("job {} succeeded: fine-tuned model {model}", job.job_id);
        run.output("fine_tuned_model", &model);
        Ok(vec![job_path])
    })?;
    Ok(())
}

// ---------------------------------------------------------------- predict

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "hosted_model"]))]
pub struct PredictArgs {
    /// Curated corpus. Defaults to `<out-dir>/corpus.jsonl`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// `model.json` written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fine-tuned model id on the hosted provider.
    #[arg(long)]
    pub hosted_model: Option<String>,
    /// Defaults to `<out-dir>/predictions.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Hosted requests in flight.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Hosted request-rate ceiling per second (0 = none).
    #[arg(long)]
    pub max_rps: Option<f64>,
}

fn predict(s: &mut Settings, out: &Path, a: PredictArgs) -> Result<(), CliError> {
    flag(s, "infer_concurrency", &a.concurrency, "--concurrency")?;
    flag(s, "infer_max_rps", &a.max_rps, "--max-rps")?;
    let split = parse_split(&a.split)?;
    let template = load_template(&a.template)?;
    let corpus_path = a.corpus.clone().unwrap_or_else(|| out.join("corpus.jsonl"));
    let output = a.output.clone().unwrap_or_else(|| out.join("predictions.jsonl"));
    let mut inputs = vec![corpus_path.clone()];
    inputs.extend(a.template.clone());
    let local = match &a.model {
        Some(model_path) => {
            let src = fs::read_to_string(model_path).map_err(|e| CliError::io(model_path.display(), e))?;
            let info: ModelInfo =
                serde_json::from_str(&src).map_err(|e| CliError::usage(format!("{}: {e}", model_path.display())))?;
            let ckpt = PathBuf::from(&info.handle.checkpoint_ref);
            let model = LogisticModel::from_snapshot(&DirCheckpoints::load(&ckpt)?)?;
            inputs.push(model_path.clone());
            inputs.push(ckpt);
            Some(model)
        }
        None => None,
    };
    let client = if local.is_none() { Some(hosted_client(s)?) } else { None };
    let Some(run) = start(Request {
        out_dir: out,
        command: "predict",
        config: s.snapshot(),
        arguments: args([
            ("corpus", corpus_path.display().to_string()),
            ("split", split.to_string()),
            ("model", opt_path(&a.model)),
            ("hosted_model", a.hosted_model.clone().unwrap_or_default()),
            ("output", output.display().to_string()),
        ]),
        inputs,
        force: false,
    })?
    else {
        return Ok(());
    };
    let options = s.infer_options();
    execute(run, |run| {
        let corpus = read_corpus(&corpus_path)?;
        let (posts, _) = split_posts(&corpus, split)?;
        let predictor = match (&local, &client, &a.hosted_model) {
            (Some(m), _, _) => Predictor::Local(m),
            (None, Some(c), Some(id)) => Predictor::Hosted { client: c, model: id.clone(), options },
            _ => unreachable!("clap requires a model source"),
        };
        let preds = predict_batch(&predictor, &posts, &template)?;
        if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
            ensure_dir(dir)?;
        }
        write_predictions(&preds, &output)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &preds {
            let key = match p.label {
                PredictedLabel::Depressed => "depressed",
                PredictedLabel::NonDepressed => "non_depressed",
                PredictedLabel::Unparsed => "unparsed",
                PredictedLabel::Failed => "failed",
            };
            *counts.entry(key).or_default() += 1;
        }
        let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
        println!("{} predictions written to {}: {}", preds.len(), output.display(), summary.join(", "));
        run.output("counts", &counts);
        if counts.get("failed") == Some(&preds.len()) {
            return Err(CliError::remote("every prediction request failed"));
        }
        Ok(vec![output.clone()])
    })?;
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Defaults to `<out-dir>/predictions.jsonl`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Corpus holding the gold labels. Defaults to `<out-dir>/corpus.jsonl`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Row name used in reports.
    #[arg(long, default_value = "model")]
    pub model_name: String,
    /// Count unparsed and failed predictions as wrong instead of excluding them.
    #[arg(long)]
    pub strict: bool,
}

fn evaluate(s: &mut Settings, out: &Path, a: EvaluateArgs) -> Result<(), CliError> {
    let split = parse_split(&a.split)?;
    let preds_path = a.predictions.clone().unwrap_or_else(|| out.join("predictions.jsonl"));
    let corpus_path = a.corpus.clone().unwrap_or_else(|| out.join("corpus.jsonl"));
    let Some(run) = start(Request {
        out_dir: out,
        command: "evaluate",
        config: s.snapshot(),
        arguments: args([
            ("split", split.to_string()),
            ("model_name", a.model_name.clone()),
            ("strict", a.strict.to_string()),
        ]),
        inputs: vec![preds_path.clone(), corpus_path.clone()],
        force: false,
    })?
    else {
        return Ok(());
    };
    execute(run, |run| {
        let preds = read_predictions(&preds_path)?;
        let corpus = read_corpus(&corpus_path)?;
        let (_, golds) = split_posts(&corpus, split)?;
        let policy = if a.strict { UnscoredPolicy::CountAsWrong } else { UnscoredPolicy::Exclude };
        let ev = evaluate_predictions(&a.model_name, &preds, &golds, policy)?;
        ensure_dir(out)?;
        let metrics_path = out.join("metrics.json");
        write_json(&metrics_path, &ev)?;
        let cm_path = out.join("confusion.csv");
        write_atomic(&cm_path, ev.confusion.to_csv().as_bytes()).map_err(|e| CliError::io(cm_path.display(), e))?;
        print!("{}", render_report(std::slice::from_ref(&ev.report), ReportFormat::Text)?);
        println!(
            "confusion: tp {} tn {} fp {} fn {}; unparsed {}, failed {} ({:.1}% unscored)",
            ev.confusion.tp, ev.confusion.tn, ev.confusion.fp, ev.confusion.fn_, ev.unparsed, ev.failed,
            ev.unscored_rate * 100.0
        );
        run.output("metrics", &ev);
        Ok(vec![metrics_path, cm_path])
    })?;
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Metrics JSON (one report or an array). Repeatable; rows keep this order.
    #[arg(long = "input", value_name = "PATH")]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Defaults to `<out-dir>/report.txt` or `report.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Loss CSV to re-emit as plot-ready `<out-dir>/loss_curve.csv`.
    #[arg(long)]
    pub loss: Option<PathBuf>,
}

fn report(s: &mut Settings, out: &Path, a: ReportArgs) -> Result<(), CliError> {
    let format: ReportFormat = a.format.parse().map_err(CliError::usage)?;
    if a.inputs.is_empty() && a.loss.is_none() {
        return Err(CliError::usage("report needs at least one --input or --loss"));
    }
    let ext = if format == ReportFormat::Csv { "csv" } else { "txt" };
    let output = a.output.clone().unwrap_or_else(|| out.join(format!("report.{ext}")));
    let mut inputs = a.inputs.clone();
    inputs.extend(a.loss.clone());
    let Some(run) = start(Request {
        out_dir: out,
        command: "report",
        config: s.snapshot(),
        arguments: args([("format", ext.to_string()), ("output", output.display().to_string())]),
        inputs,
        force: false,
    })?
    else {
        return Ok(());
    };
    execute(run, |_run| {
        let mut artifacts = Vec::new();
        if !a.inputs.is_empty() {
            let mut rows = Vec::new();
            for p in &a.inputs {
                rows.extend(read_reports(p)?);
            }
            let doc = render_report(&rows, format)?;
            if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
                ensure_dir(dir)?;
            }
            write_atomic(&output, doc.as_bytes()).map_err(|e| CliError::io(output.display(), e))?;
            print!("{doc}");
            artifacts.push(output.clone());
        }
        if let Some(loss) = &a.loss {
            let metrics = read_loss_csv(loss)?;
            ensure_dir(out)?;
            let curve = out.join("loss_curve.csv");
            export_loss_csv(&metrics, &curve)?;
            println!("plot-ready loss curve ({} epochs): {}", metrics.len(), curve.display());
            artifacts.push(curve);
        }
        Ok(artifacts)
    })?;
    Ok(())
}

// ---------------------------------------------------------------- mock-provider

#[derive(Args, Debug)]
pub struct MockArgs {
    /// Scripted behaviour (JSON). Every job succeeds if absent.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: String,
}

fn mock_provider(a: MockArgs) -> Result<(), CliError> {
    let script = match &a.script {
        Some(p) => MockScript::load(p)?,
        None => MockScript::default(),
    };
    let server = MockServer::start(&a.addr, MockProvider::new(script)?)?;
    println!("mock provider listening; set DEPSCREEN_API_BASE={}", server.base_url());
    std::io::stdout().flush().ok();
    server.join();
    Ok(())
}
