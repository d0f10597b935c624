//! Confusion matrices, precision / recall / F1 / accuracy, and comparative
//! report rendering. DEPRESSED is the positive class throughout.
//!
//! Metrics are `Option<f64>`: `None` means the denominator is zero and the
//! value is undefined. Each metric is one integer division evaluated in `f64`
//! (numerator and denominator are exact below 2^53).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::infer::{PredictedLabel, Prediction};
use crate::Label;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty list")]
    Empty,
    #[error("length mismatch: {preds} predictions vs {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("duplicate model name in report: {0:?}")]
    DuplicateModel(String),
    #[error("duplicate post id {0:?}")]
    DuplicateId(String),
    #[error("prediction and gold id sets differ: {}", describe_mismatch(.missing, .extra))]
    IdMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("no prediction could be scored ({unparsed} unparsed, {failed} failed)")]
    NothingScored { unparsed: usize, failed: usize },
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
}

const MAX_LISTED: usize = 10;

fn describe_mismatch(missing: &[String], extra: &[String]) -> String {
    let mut s = String::new();
    if !missing.is_empty() {
        let _ = write!(s, "no prediction for {}", missing.join(", "));
    }
    if !extra.is_empty() {
        if !s.is_empty() {
            s.push_str("; ");
        }
        let _ = write!(s, "no gold label for {}", extra.join(", "));
    }
    s
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, pred: Label, gold: Label) {
        match (pred, gold) {
            (Label::Depressed, Label::Depressed) => self.tp += 1,
            (Label::NonDepressed, Label::NonDepressed) => self.tn += 1,
            (Label::Depressed, Label::NonDepressed) => self.fp += 1,
            (Label::NonDepressed, Label::Depressed) => self.fn_ += 1,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// 2TP / (2TP + FP + FN).
    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// 2×2 CSV: rows are the actual class, columns the predicted class.
    pub fn to_csv(&self) -> String {
        format!(
            "actual\\predicted,DEPRESSED,NON_DEPRESSED\nDEPRESSED,{},{}\nNON_DEPRESSED,{},{}\n",
            self.tp, self.fn_, self.fp, self.tn
        )
    }
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        cm.record(*p, *g);
    }
    Ok(cm)
}

/// True iff the harmonic mean of `precision` and `recall` is within `tol` of
/// `reported_f1`.
pub fn f1_consistency(precision: f64, recall: f64, reported_f1: f64, tol: f64) -> bool {
    let hm = 2.0 * precision * recall / (precision + recall);
    (hm - reported_f1).abs() <= tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub n: Option<u64>,
}

impl MetricsReport {
    pub fn from_confusion(model_name: impl Into<String>, cm: &ConfusionMatrix) -> Self {
        MetricsReport {
            model_name: model_name.into(),
            precision: cm.precision(),
            recall: cm.recall(),
            f1: cm.f1(),
            accuracy: cm.accuracy(),
            n: Some(cm.total()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (expected text or csv)")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 5] = ["Model", "Accuracy(%)", "Precision", "Recall", "F1-Score"];
pub const UNDEFINED: &str = "undefined";

/// Percentage with at most one decimal; a trailing ".0" is dropped.
/// Rounding is `format!`'s: exact binary ties go to even.
pub fn format_accuracy(acc: Option<f64>) -> String {
    match acc {
        None => UNDEFINED.into(),
        Some(a) => {
            let s = format!("{:.1}", a * 100.0);
            s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
        }
    }
}

pub fn format_metric(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.into(), |x| format!("{x:.3}"))
}

/// Render rows in input order. Text pads only the model column; CSV follows
/// RFC 4180 quoting.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut seen = HashSet::new();
    for r in reports {
        if !seen.insert(r.model_name.as_str()) {
            return Err(EvalError::DuplicateModel(r.model_name.clone()));
        }
    }
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.model_name.clone(),
                format_accuracy(r.accuracy),
                format_metric(r.precision),
                format_metric(r.recall),
                format_metric(r.f1),
            ]
        })
        .collect();
    Ok(match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).expect("in-memory write");
            for row in &rows {
                w.write_record(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
        }
        ReportFormat::Text => {
            let width = rows
                .iter()
                .map(|r| r[0].chars().count())
                .chain(std::iter::once(REPORT_COLUMNS[0].len()))
                .max()
                .unwrap_or(0);
            let mut out = String::new();
            let line = |cells: [&str; 5]| {
                format!("{:<width$} | {} | {} | {} | {}\n", cells[0], cells[1], cells[2], cells[3], cells[4])
            };
            out.push_str(&line(REPORT_COLUMNS));
            let rule_len = out.trim_end().chars().count();
            out.push_str(&"-".repeat(rule_len));
            out.push('\n');
            for r in &rows {
                out.push_str(&line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
            }
            out
        }
    })
}

/// Read reports from JSON: either one report object or an array of them.
pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>, EvalError> {
    let src = fs::read_to_string(path).map_err(|e| EvalError::Read { path: path.to_path_buf(), message: e.to_string() })?;
    let value: serde_json::Value =
        serde_json::from_str(&src).map_err(|e| EvalError::Read { path: path.to_path_buf(), message: e.to_string() })?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    };
    parsed.map_err(|e| EvalError::Read { path: path.to_path_buf(), message: e.to_string() })
}

/// How unparsed and failed predictions are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnscoredPolicy {
    /// Leave them out of the matrix and report them separately.
    #[default]
    Exclude,
    /// Count them as wrong: the opposite of the gold label.
    CountAsWrong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(flatten)]
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub unparsed: usize,
    pub failed: usize,
    /// Share of predictions that could not be scored.
    pub unscored_rate: f64,
}

/// Join predictions to gold labels by post id and score them.
pub fn evaluate_predictions(
    model_name: &str,
    preds: &[Prediction],
    golds: &HashMap<String, Label>,
    policy: UnscoredPolicy,
) -> Result<Evaluation, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut ids = HashSet::new();
    for p in preds {
        if !ids.insert(p.post_id.as_str()) {
            return Err(EvalError::DuplicateId(p.post_id.clone()));
        }
    }
    let missing: BTreeSet<&str> = golds.keys().map(String::as_str).filter(|id| !ids.contains(id)).collect();
    let extra: BTreeSet<&str> = ids.iter().copied().filter(|id| !golds.contains_key(*id)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let take = |s: BTreeSet<&str>| s.into_iter().take(MAX_LISTED).map(str::to_string).collect();
        return Err(EvalError::IdMismatch { missing: take(missing), extra: take(extra) });
    }
    let mut cm = ConfusionMatrix::default();
    let (mut unparsed, mut failed) = (0, 0);
    for p in preds {
        let gold = golds[&p.post_id];
        match p.label.label() {
            Some(l) => cm.record(l, gold),
            None => {
                if p.label == PredictedLabel::Failed {
                    failed += 1;
                } else {
                    unparsed += 1;
                }
                if policy == UnscoredPolicy::CountAsWrong {
                    cm.record(gold.flipped(), gold);
                }
            }
        }
    }
    if cm.total() == 0 {
        return Err(EvalError::NothingScored { unparsed, failed });
    }
    Ok(Evaluation {
        report: MetricsReport::from_confusion(model_name, &cm),
        confusion: cm,
        unparsed,
        failed,
        unscored_rate: (unparsed + failed) as f64 / preds.len() as f64,
    })
}
