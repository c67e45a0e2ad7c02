//! Confusion statistics, the ten binary classification metrics, ROC/AUC and
//! one-vs-rest multiclass reports.
//!
//! Ratios whose denominator is zero are reported as `None` rather than 0.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Counts against `positive` (one-vs-rest for multiclass ids).
pub fn confusion(preds: &[usize], labels: &[usize], positive: usize) -> Result<ConfusionCounts> {
    if preds.len() != labels.len() {
        return Err(Error::dims("confusion inputs", labels.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("confusion inputs".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == positive, l == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub fpr: Option<f64>,
    pub mcc: Option<f64>,
    pub gmean: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

pub const METRIC_NAMES: [&str; 10] = [
    "accuracy",
    "precision",
    "recall",
    "specificity",
    "f1",
    "f2",
    "fpr",
    "mcc",
    "gmean",
    "balanced_accuracy",
];

impl BinaryMetrics {
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.specificity,
            self.f1,
            self.f2,
            self.fpr,
            self.mcc,
            self.gmean,
            self.balanced_accuracy,
        ]
    }

    fn from_values(v: [Option<f64>; 10]) -> Self {
        BinaryMetrics {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            specificity: v[3],
            f1: v[4],
            f2: v[5],
            fpr: v[6],
            mcc: v[7],
            gmean: v[8],
            balanced_accuracy: v[9],
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub fn basic_metrics(c: &ConfusionCounts) -> BinaryMetrics {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let (f1, f2) = match (precision, recall) {
        (Some(p), Some(r)) => (ratio(2.0 * p * r, p + r), ratio(5.0 * p * r, 4.0 * p + r)),
        _ => (None, None),
    };
    let mcc_den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = ratio(tp * tn - fp * fn_, mcc_den.sqrt());
    let (gmean, balanced_accuracy) = match (recall, specificity) {
        (Some(r), Some(s)) => (Some((r * s).sqrt()), Some(0.5 * (r + s))),
        _ => (None, None),
    };
    BinaryMetrics {
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        precision,
        recall,
        specificity,
        f1,
        f2,
        fpr: ratio(fp, fp + tn),
        mcc,
        gmean,
        balanced_accuracy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC points over every distinct threshold, from (0,0) to (1,1). `None`
/// when either class is absent.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Option<Vec<RocPoint>> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must align");
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp / neg,
            tpr: tp / pos,
            threshold: s,
        });
    }
    Some(points)
}

/// Area under the ROC curve by trapezoidal integration. Tied scores form a
/// diagonal segment, which counts each positive/negative tie as one half.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pts = roc_curve(scores, labels)?;
    let area = pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum::<f64>();
    Some(area.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: usize,
    pub name: String,
    pub support: u64,
    pub counts: ConfusionCounts,
    /// All `None` when the class never occurs among the labels.
    pub metrics: BinaryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub metrics: BinaryMetrics,
    /// Per metric, how many class rows were skipped because their value was null.
    pub skipped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub per_class: Vec<ClassRow>,
    pub macro_avg: MacroAverage,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    /// Positive-vs-rest metrics when a binary view was requested.
    pub binary: Option<BinaryMetrics>,
    pub auc_roc: Option<f64>,
}

/// Per-class one-vs-rest metrics with unweighted macro averages.
pub fn multiclass_report(
    preds: &[usize],
    labels: &[usize],
    class_names: &[String],
) -> Result<MetricsReport> {
    let k = class_names.len();
    if k < 2 {
        return Err(Error::pre("multiclass report needs at least two classes"));
    }
    if preds.len() != labels.len() {
        return Err(Error::dims("report inputs", labels.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("report inputs".into()));
    }
    if let Some(&bad) = preds.iter().chain(labels).find(|&&c| c >= k) {
        return Err(Error::pre(format!("class id {bad} outside 0..{k}")));
    }
    let mut grid = vec![vec![0u64; k]; k];
    for (&p, &l) in preds.iter().zip(labels) {
        grid[l][p] += 1;
    }
    let correct: u64 = (0..k).map(|c| grid[c][c]).sum();
    let n = preds.len() as u64;

    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let counts = confusion(preds, labels, c)?;
        let support = counts.tp + counts.fn_;
        let metrics = if support == 0 {
            BinaryMetrics::default()
        } else {
            basic_metrics(&counts)
        };
        per_class.push(ClassRow {
            class: c,
            name: class_names[c].clone(),
            support,
            counts,
            metrics,
        });
    }

    let mut averages = [None; 10];
    let mut skipped = BTreeMap::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let vals: Vec<f64> = per_class.iter().filter_map(|r| r.metrics.values()[m]).collect();
        skipped.insert(name.to_string(), k - vals.len());
        if !vals.is_empty() {
            averages[m] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }

    Ok(MetricsReport {
        samples: n,
        classes: class_names.to_vec(),
        accuracy: correct as f64 / n as f64,
        per_class,
        macro_avg: MacroAverage {
            metrics: BinaryMetrics::from_values(averages),
            skipped,
        },
        confusion: grid,
        binary: None,
        auc_roc: None,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-class table plus a `macro` row.
    pub fn write_class_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "class,name,support,tp,tn,fp,fn,{}", METRIC_NAMES.join(","))?;
        for r in &self.per_class {
            let vals: Vec<String> = r.metrics.values().iter().map(|v| fmt_opt(*v)).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.class,
                r.name,
                r.support,
                r.counts.tp,
                r.counts.tn,
                r.counts.fp,
                r.counts.fn_,
                vals.join(",")
            )?;
        }
        let vals: Vec<String> = self
            .macro_avg
            .metrics
            .values()
            .iter()
            .map(|v| fmt_opt(*v))
            .collect();
        writeln!(w, "macro,,{},,,,,{}", self.samples, vals.join(","))
    }

    /// k×k integer grid with class names on both axes.
    pub fn write_confusion_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "true\\pred,{}", self.classes.join(","))?;
        for (name, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn write_roc_csv<W: Write>(w: &mut W, points: &[RocPoint]) -> std::io::Result<()> {
    writeln!(w, "fpr,tpr,threshold")?;
    for p in points {
        writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_have_no_errors() {
        let l = vec![0, 1, 1, 0, 1];
        let c = confusion(&l, &l, 1).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let m = basic_metrics(&c);
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.gmean, m.mcc] {
            assert_eq!(v, Some(1.0));
        }
        assert_eq!(m.fpr, Some(0.0));
    }

    #[test]
    fn all_wrong_binary_has_no_hits() {
        let l = vec![0, 1, 1, 0];
        let p: Vec<usize> = l.iter().map(|x| 1 - x).collect();
        let c = confusion(&p, &l, 1).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn symmetric_counts_give_zero_mcc() {
        let m = basic_metrics(&ConfusionCounts {
            tp: 25,
            tn: 25,
            fp: 25,
            fn_: 25,
        });
        assert_eq!(m.accuracy, Some(0.5));
        assert_eq!(m.mcc, Some(0.0));
    }

    #[test]
    fn zero_denominators_are_null() {
        let m = basic_metrics(&ConfusionCounts {
            tp: 0,
            tn: 10,
            fp: 0,
            fn_: 0,
        });
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.mcc, None);
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn length_mismatch_is_fatal() {
        assert!(confusion(&[0, 1], &[0], 1).is_err());
    }

    #[test]
    fn auc_extremes() {
        let labels = [false, false, true, true];
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &labels), Some(1.0));
        assert_eq!(auc_roc(&[0.5; 4], &labels), Some(0.5));
        assert_eq!(auc_roc(&[0.5; 2], &[true, true]), None);
    }

    #[test]
    fn absent_class_row_is_null_filled() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = multiclass_report(&[0, 1, 2, 0], &[0, 1, 1, 0], &names).unwrap();
        assert_eq!(r.per_class[2].metrics, BinaryMetrics::default());
        assert_eq!(r.macro_avg.skipped["precision"], 1);
        assert_eq!(r.confusion[1], vec![0, 1, 1]);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn binary_report_row_matches_basic_metrics() {
        let names: Vec<String> = ["neg", "pos"].iter().map(|s| s.to_string()).collect();
        let labels = [0, 1, 1, 0, 1, 0, 0, 1];
        let preds = [0, 1, 0, 0, 1, 1, 0, 1];
        let r = multiclass_report(&preds, &labels, &names).unwrap();
        let direct = basic_metrics(&confusion(&preds, &labels, 1).unwrap());
        assert_eq!(r.per_class[1].metrics, direct);
    }
}
