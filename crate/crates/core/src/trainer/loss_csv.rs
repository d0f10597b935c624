use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::EpochMetrics;
use crate::util;

#[derive(Debug, thiserror::Error)]
pub enum LossCsvError {
    #[error("no epoch metrics to export")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

pub const LOSS_CSV_HEADER: &str = "epoch,train_loss,val_loss";

/// Six-decimal fixed point, the precision used in every loss file.
pub fn format_loss(x: f64) -> String {
    format!("{x:.6}")
}

pub fn render_loss_csv(metrics: &[EpochMetrics]) -> Result<String, LossCsvError> {
    if metrics.is_empty() {
        return Err(LossCsvError::Empty);
    }
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for m in metrics {
        writeln!(out, "{},{},{}", m.epoch, format_loss(m.train_loss), format_loss(m.val_loss)).unwrap();
    }
    Ok(out)
}

/// Write `epoch,train_loss,val_loss` rows; returns the number of data rows.
pub fn export_loss_csv(metrics: &[EpochMetrics], path: &Path) -> Result<usize, LossCsvError> {
    let csv = render_loss_csv(metrics)?;
    util::write_atomic(path, csv.as_bytes())
        .map_err(|source| LossCsvError::Write { path: path.to_path_buf(), source })?;
    Ok(metrics.len())
}

/// Parse a loss CSV back into metrics (wall time is not stored and reads as 0).
pub fn read_loss_csv(path: &Path) -> Result<Vec<EpochMetrics>, LossCsvError> {
    let src = fs::read_to_string(path).map_err(|source| LossCsvError::Read { path: path.to_path_buf(), source })?;
    let err = |line: usize, message: String| LossCsvError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = src.lines();
    match lines.next() {
        Some(LOSS_CSV_HEADER) => {}
        other => return Err(err(1, format!("expected header {LOSS_CSV_HEADER:?}, got {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(err(line_no, format!("expected 3 columns, got {}", cols.len())));
        }
        let epoch = cols[0].parse().map_err(|e| err(line_no, format!("epoch: {e}")))?;
        let train_loss = cols[1].parse().map_err(|e| err(line_no, format!("train_loss: {e}")))?;
        let val_loss = cols[2].parse().map_err(|e| err(line_no, format!("val_loss: {e}")))?;
        out.push(EpochMetrics { epoch, train_loss, val_loss, wall_time_s: 0.0 });
    }
    Ok(out)
}
