//! Precision/recall scoring of predicted masks against ground truth.
//!
//! Foreground is the positive class. When a denominator is empty the metric
//! is 1 if the other side is also empty and 0 otherwise, so degenerate
//! all-background images neither crash nor poison averages.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::load_mask;
use crate::segment::Mask;

/// Pixel counts and the derived metrics for one mask pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
}

/// Counts per-pixel TP/FP/FN with foreground positive and computes the two
/// ratios.
pub fn precision_recall(pred: &Mask, truth: &Mask) -> Result<EvalReport> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::invalid(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (p, t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio_or_empty(tp, fp, fn_);
    let recall = ratio_or_empty(tp, fn_, fp);
    Ok(EvalReport {
        tp,
        fp,
        fn_,
        precision,
        recall,
    })
}

/// tp / (tp + denom); when that denominator is zero, 1 if the opposite count
/// is also zero, else 0.
fn ratio_or_empty(tp: u64, denom: u64, opposite: u64) -> f64 {
    if tp + denom > 0 {
        tp as f64 / (tp + denom) as f64
    } else if opposite == 0 {
        1.0
    } else {
        0.0
    }
}

/// One scored image of a dataset run.
#[derive(Debug, Clone, Serialize)]
pub struct ImageEval {
    pub name: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Dataset-level evaluation: per-image reports plus the aggregate, whose
/// precision and recall are unweighted means over images and whose counts
/// are sums.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetEval {
    pub per_image: Vec<ImageEval>,
    pub aggregate: EvalReport,
}

/// Loads and scores each (prediction, truth) pair. Fails on the first pair
/// that cannot be loaded or whose dimensions differ, naming the offender.
pub fn evaluate_dataset(pairs: &[(PathBuf, PathBuf)]) -> Result<DatasetEval> {
    if pairs.is_empty() {
        return Err(Error::invalid("no mask pairs to evaluate"));
    }
    let mut per_image = Vec::with_capacity(pairs.len());
    for (pred_path, truth_path) in pairs {
        let pred = load_mask(pred_path)?;
        let truth = load_mask(truth_path)?;
        let report = precision_recall(&pred, &truth).map_err(|e| {
            Error::invalid(format!(
                "pair {} / {}: {e}",
                pred_path.display(),
                truth_path.display()
            ))
        })?;
        per_image.push(ImageEval {
            name: display_name(pred_path),
            report,
        });
    }
    let count = per_image.len() as f64;
    let aggregate = EvalReport {
        tp: per_image.iter().map(|r| r.report.tp).sum(),
        fp: per_image.iter().map(|r| r.report.fp).sum(),
        fn_: per_image.iter().map(|r| r.report.fn_).sum(),
        precision: per_image.iter().map(|r| r.report.precision).sum::<f64>() / count,
        recall: per_image.iter().map(|r| r.report.recall).sum::<f64>() / count,
    };
    Ok(DatasetEval {
        per_image,
        aggregate,
    })
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

impl DatasetEval {
    /// The line-oriented report: `name,tp,fp,fn,precision,recall` per image
    /// and a final `aggregate` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for image in &self.per_image {
            out.push_str(&csv_line(&image.name, &image.report));
        }
        out.push_str(&csv_line("aggregate", &self.aggregate));
        out
    }
}

fn csv_line(name: &str, r: &EvalReport) -> String {
    format!(
        "{name},{},{},{},{:.6},{:.6}\n",
        r.tp, r.fp, r.fn_, r.precision, r.recall
    )
}
