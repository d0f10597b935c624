mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "depscreen",
    version,
    about = "Curate, fine-tune, predict and evaluate depression-detection classifiers",
    long_about = "Curate a labeled corpus from social-media posts, export chat-format training data, \
train locally or fine-tune on a hosted provider, predict, evaluate and report.\n\n\
Settings precedence: flags > DEPSCREEN_<KEY> environment variables > --config file > defaults.\n\
The hosted credential is read from DEPSCREEN_API_KEY and the base URL from DEPSCREEN_API_BASE.\n\n\
Exit codes: 0 success, 1 other failure, 2 validation or usage error, 3 remote failure or timeout."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// TOML settings file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for splitting and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for artifacts and run manifests.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Override any setting, e.g. `--set infer_max_rps=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Label posts with the anchor rules and write a split corpus.
    Curate(commands::CurateArgs),
    /// Write one split of a corpus as chat-format JSONL.
    Export(commands::ExportArgs),
    /// Train the local reference backend and write checkpoints and the loss curve.
    Train(commands::TrainArgs),
    /// Upload a chat file, create a hosted fine-tuning job and poll it to completion.
    FinetuneHosted(commands::FinetuneArgs),
    /// Predict labels for one corpus split with a local or hosted model.
    Predict(commands::PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(commands::EvaluateArgs),
    /// Render a comparative report and plot-ready loss data.
    Report(commands::ReportArgs),
    /// Serve the scripted mock provider over HTTP until interrupted.
    MockProvider(commands::MockArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
