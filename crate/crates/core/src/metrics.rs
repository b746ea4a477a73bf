//! Pixel-level change detection scores.
//!
//! Class 1 is "changed", class 0 "unchanged". Every ratio whose denominator is
//! zero is reported as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ChangeMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    /// Swaps the roles of the two classes.
    pub fn flipped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(pred: &ChangeMask, gt: &ChangeMask) -> Result<ConfusionMatrix> {
    if !pred.same_dims(gt) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs label {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        match (p != 0, g != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// The nine columns of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision0: f64,
    pub recall0: f64,
    pub f1_0: f64,
    pub iou0: f64,
    pub precision1: f64,
    pub recall1: f64,
    pub f1_1: f64,
    pub iou1: f64,
    pub acc: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F1 and IoU of the positive class of `cm`.
fn positive_class(cm: &ConfusionMatrix) -> [f64; 4] {
    let (tp, fp, fn_) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64);
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    [p, r, ratio(2.0 * p * r, p + r), ratio(tp, tp + fp + fn_)]
}

pub fn class_metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics> {
    if cm.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let [precision1, recall1, f1_1, iou1] = positive_class(cm);
    let [precision0, recall0, f1_0, iou0] = positive_class(&cm.flipped());
    Ok(ClassMetrics {
        precision0,
        recall0,
        f1_0,
        iou0,
        precision1,
        recall1,
        f1_1,
        iou1,
        acc: (cm.tp + cm.tn) as f64 / cm.total() as f64,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum the matrices, then compute ratios.
    #[default]
    Micro,
    /// Mean of per-sample ratios.
    Macro,
}

impl Aggregation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            other => Err(Error::Config(format!("unknown aggregation `{other}`"))),
        }
    }
}

/// Pixel-pooled metrics over a dataset.
pub fn aggregate(samples: &[ConfusionMatrix]) -> Result<ClassMetrics> {
    aggregate_with(samples, Aggregation::Micro)
}

pub fn aggregate_with(samples: &[ConfusionMatrix], mode: Aggregation) -> Result<ClassMetrics> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no confusion matrices to aggregate".into()));
    }
    match mode {
        Aggregation::Micro => {
            let total = samples
                .iter()
                .fold(ConfusionMatrix::default(), |acc, cm| acc.merge(cm));
            class_metrics(&total)
        }
        Aggregation::Macro => {
            let per: Vec<ClassMetrics> = samples.iter().map(class_metrics).collect::<Result<_>>()?;
            let n = per.len() as f64;
            let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / n;
            Ok(ClassMetrics {
                precision0: mean(|m| m.precision0),
                recall0: mean(|m| m.recall0),
                f1_0: mean(|m| m.f1_0),
                iou0: mean(|m| m.iou0),
                precision1: mean(|m| m.precision1),
                recall1: mean(|m| m.recall1),
                f1_1: mean(|m| m.f1_1),
                iou1: mean(|m| m.iou1),
                acc: mean(|m| m.acc),
            })
        }
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub metrics: ClassMetrics,
    pub confusion: ConfusionMatrix,
    pub samples: usize,
    pub failed: usize,
}

/// Aligned text table, values in percent: Method, Pre. (0/1), Rec. (0/1),
/// F1 (0/1), IoU (0/1), ACC.
pub fn render_table(rows: &[MethodRow]) -> String {
    let pct = |v: f64| format!("{:.1}", 100.0 * v);
    let pair = |a: f64, b: f64| format!("{}/{}", pct(a), pct(b));
    let header = ["Method", "Pre. (0/1)", "Rec. (0/1)", "F1 (0/1)", "IoU (0/1)", "ACC"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                r.method.clone(),
                pair(m.precision0, m.precision1),
                pair(m.recall0, m.recall1),
                pair(m.f1_0, m.f1_1),
                pair(m.iou0, m.iou1),
                pct(m.acc),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// JSON form of a metrics table, with the conventions it was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregation: Aggregation,
    /// Value assigned to ratios with a zero denominator.
    pub zero_division: f64,
    pub rows: Vec<MethodRow>,
}
