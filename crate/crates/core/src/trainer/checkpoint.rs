use std::fs;
use std::path::{Path, PathBuf};

use super::Snapshot;
use crate::util;

#[derive(Debug, thiserror::Error)]
#[error("checkpoint {path}: {source}")]
pub struct CheckpointError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

/// Where per-epoch snapshots go. `save` returns an opaque reference.
pub trait CheckpointStore {
    fn save(&mut self, epoch: u32, snapshot: &Snapshot) -> Result<String, CheckpointError>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryCheckpoints {
    pub saved: Vec<(String, Snapshot)>,
}

impl CheckpointStore for MemoryCheckpoints {
    fn save(&mut self, epoch: u32, snapshot: &Snapshot) -> Result<String, CheckpointError> {
        let reference = format!("mem:epoch-{epoch:04}");
        self.saved.push((reference.clone(), snapshot.clone()));
        Ok(reference)
    }
}

/// One JSON file per epoch: `<dir>/epoch-0001.json`.
#[derive(Debug, Clone)]
pub struct DirCheckpoints {
    dir: PathBuf,
}

impl DirCheckpoints {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, CheckpointError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| CheckpointError { path: dir.clone(), source })?;
        Ok(DirCheckpoints { dir })
    }

    pub fn path_for(&self, epoch: u32) -> PathBuf {
        self.dir.join(format!("epoch-{epoch:04}.json"))
    }

    pub fn load(path: &Path) -> Result<Snapshot, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError { path: path.to_path_buf(), source })?;
        serde_json::from_slice(&bytes).map_err(|e| CheckpointError {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }

    /// Delete every epoch file except those in `keep`.
    pub fn prune_except(&self, keep: &[u32]) -> Result<Vec<PathBuf>, CheckpointError> {
        let mut removed = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|source| CheckpointError { path: self.dir.clone(), source })?;
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().to_string();
            let epoch = name
                .strip_prefix("epoch-")
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse::<u32>().ok());
            if let Some(epoch) = epoch {
                if !keep.contains(&epoch) {
                    let p = entry.path();
                    fs::remove_file(&p).map_err(|source| CheckpointError { path: p.clone(), source })?;
                    removed.push(p);
                }
            }
        }
        removed.sort();
        Ok(removed)
    }
}

impl CheckpointStore for DirCheckpoints {
    fn save(&mut self, epoch: u32, snapshot: &Snapshot) -> Result<String, CheckpointError> {
        let path = self.path_for(epoch);
        let mut json = serde_json::to_vec(snapshot).expect("snapshot serializes");
        json.push(b'\n');
        util::write_atomic(&path, &json).map_err(|source| CheckpointError { path: path.clone(), source })?;
        Ok(path.to_string_lossy().into_owned())
    }
}
