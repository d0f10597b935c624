//! Per-command run manifests under `<out-dir>/manifests/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use depscreen::{sha256_hex, write_atomic};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub status: RunStatus,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    /// SHA-256 over command, config, arguments and input hashes.
    pub input_fingerprint: String,
    pub config: BTreeMap<String, Value>,
    pub arguments: BTreeMap<String, String>,
    /// Input path -> SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Artifact path -> SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(sha256_hex(bytes))
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join("manifests").join(format!("{command}.json"))
}

pub fn load(path: &Path) -> Option<RunManifest> {
    let bytes = fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// What to do with a command invocation given the previous manifest.
pub enum Plan {
    /// Same inputs, artifacts intact: nothing to do.
    UpToDate(RunManifest),
    Run(Run),
}

pub struct Run {
    pub manifest: RunManifest,
    path: PathBuf,
}

pub struct Request<'a> {
    pub out_dir: &'a Path,
    pub command: &'a str,
    pub config: BTreeMap<String, Value>,
    pub arguments: BTreeMap<String, String>,
    pub inputs: Vec<PathBuf>,
    /// Ignore a matching complete manifest and run again.
    pub force: bool,
}

fn artifacts_intact(m: &RunManifest) -> bool {
    m.artifacts.iter().all(|(p, h)| hash_file(Path::new(p)).map(|x| &x == h).unwrap_or(false))
}

/// Hash the inputs, compare with the previous manifest, and either report
/// the run as up to date or write a fresh `running` manifest.
pub fn plan(req: Request<'_>) -> Result<Plan, CliError> {
    let mut inputs = BTreeMap::new();
    for p in &req.inputs {
        inputs.insert(p.display().to_string(), hash_file(p)?);
    }
    let canonical = serde_json::to_string(&(req.command, &req.config, &req.arguments, &inputs)).expect("serializable");
    let fingerprint = sha256_hex(canonical);
    let path = manifest_path(req.out_dir, req.command);
    if !req.force {
        if let Some(prev) = load(&path) {
            if prev.status == RunStatus::Complete && prev.input_fingerprint == fingerprint && artifacts_intact(&prev) {
                return Ok(Plan::UpToDate(prev));
            }
        }
    }
    let started_at = Utc::now();
    let manifest = RunManifest {
        run_id: format!("{}-{}", req.command, started_at.format("%Y%m%dT%H%M%S%.6fZ")),
        command: req.command.to_string(),
        status: RunStatus::Running,
        started_at,
        finished_at: None,
        input_fingerprint: fingerprint,
        config: req.config,
        arguments: req.arguments,
        inputs,
        artifacts: BTreeMap::new(),
        outputs: BTreeMap::new(),
        error: None,
    };
    let run = Run { manifest, path };
    run.save()?;
    Ok(Plan::Run(run))
}

impl Run {
    pub fn save(&self) -> Result<(), CliError> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
        }
        let mut json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        json.push(b'\n');
        write_atomic(&self.path, &json).map_err(|e| CliError::io(self.path.display(), e))
    }

    pub fn output(&mut self, key: &str, value: impl Serialize) {
        self.manifest.outputs.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn finish(mut self, artifacts: &[PathBuf]) -> Result<RunManifest, CliError> {
        for a in artifacts {
            self.manifest.artifacts.insert(a.display().to_string(), hash_file(a)?);
        }
        self.manifest.status = RunStatus::Complete;
        self.manifest.finished_at = Some(Utc::now());
        self.save()?;
        Ok(self.manifest)
    }

    pub fn fail(mut self, error: &CliError) -> Result<(), CliError> {
        self.manifest.status = RunStatus::Failed;
        self.manifest.finished_at = Some(Utc::now());
        self.manifest.error = Some(error.message.clone());
        self.save()
    }
}

pub fn describe(m: &RunManifest) -> String {
    let when = m.finished_at.unwrap_or(m.started_at).to_rfc3339_opts(SecondsFormat::Secs, true);
    format!("{} is up to date (run {} finished {when}); nothing to do", m.command, m.run_id)
}
