//! Confusion matrices, the metric suite, and baseline-vs-candidate
//! comparison.
//!
//! Rows are actual labels, columns predicted labels, both in
//! `[Negative, Positive]` order.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn counts(&self) -> [[u64; 2]; 2] {
        self.counts
    }

    pub fn get(&self, actual: Label, predicted: Label) -> u64 {
        self.counts[actual.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, actual: Label) -> u64 {
        self.counts[actual.index()].iter().sum()
    }

    pub fn predicted(&self, label: Label) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// Same matrix with the class order reversed on both axes.
    pub fn swapped(&self) -> Self {
        let [[a, b], [c, d]] = self.counts;
        ConfusionMatrix {
            counts: [[d, c], [b, a]],
        }
    }
}

/// Bracketed, right-aligned rows: `[[94  5]` / ` [35 64]]`.
impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1);
        let [[a, b], [c, d]] = self.counts;
        write!(f, "[[{a:>w$} {b:>w$}]\n [{c:>w$} {d:>w$}]]")
    }
}

pub fn confusion(actual: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("cannot build a confusion matrix from no predictions"));
    }
    let mut counts = [[0u64; 2]; 2];
    for (a, p) in actual.iter().zip(predicted) {
        counts[a.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<Label, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Names accepted by [`MetricsReport::get`], in display order.
pub const METRIC_NAMES: [&str; 10] = [
    "accuracy",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "precision_negative",
    "recall_negative",
    "f1_negative",
    "precision_positive",
    "recall_positive",
    "f1_positive",
];

impl MetricsReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[&label]
    }

    pub fn test_size(&self) -> u64 {
        self.per_class.values().map(|c| c.support).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let class = |l| self.per_class.get(&l);
        Some(match name {
            "accuracy" => self.accuracy,
            "macro_precision" => self.macro_precision,
            "macro_recall" => self.macro_recall,
            "macro_f1" => self.macro_f1,
            "precision_negative" => class(Label::Negative)?.precision,
            "recall_negative" => class(Label::Negative)?.recall,
            "f1_negative" => class(Label::Negative)?.f1,
            "precision_positive" => class(Label::Positive)?.precision,
            "recall_positive" => class(Label::Positive)?.recall,
            "f1_positive" => class(Label::Positive)?.f1,
            _ => return None,
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let per_class: BTreeMap<Label, ClassMetrics> = Label::ALL
        .into_iter()
        .map(|l| {
            let hit = cm.get(l, l);
            let precision = ratio(hit, cm.predicted(l));
            let recall = ratio(hit, cm.support(l));
            (
                l,
                ClassMetrics {
                    precision,
                    recall,
                    f1: harmonic(precision, recall),
                    support: cm.support(l),
                },
            )
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.values().map(f).sum::<f64>() / per_class.len() as f64;
    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), total),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub metric: String,
    pub baseline: f64,
    pub candidate: f64,
    pub absolute: f64,
    /// `100 * (candidate - baseline) / baseline`; `None` when the baseline
    /// is zero.
    pub relative_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: MetricsReport,
    pub candidate: MetricsReport,
    pub changes: Vec<MetricChange>,
}

impl ComparisonReport {
    pub fn relative_change(&self, metric: &str) -> Option<f64> {
        self.changes
            .iter()
            .find(|c| c.metric == metric)
            .and_then(|c| c.relative_percent)
    }

    /// Plain-text table of both reports and the relative changes.
    pub fn render(&self, baseline_name: &str, candidate_name: &str) -> String {
        let bw = baseline_name.len().max(8);
        let cw = candidate_name.len().max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:>bw$} {:>cw$} {:>9}",
            "metric", baseline_name, candidate_name, "change"
        );
        for c in &self.changes {
            let _ = writeln!(
                out,
                "{:<18} {:>bw$} {:>cw$} {:>9}",
                c.metric,
                format_fixed(c.baseline, 4),
                format_fixed(c.candidate, 4),
                format_percent(c.relative_percent),
            );
        }
        out
    }
}

pub fn compare(baseline: &MetricsReport, candidate: &MetricsReport) -> Result<ComparisonReport> {
    if baseline.test_size() != candidate.test_size() {
        return Err(Error::invalid(format!(
            "reports come from different test sets ({} vs {} documents)",
            baseline.test_size(),
            candidate.test_size()
        )));
    }
    let changes = METRIC_NAMES
        .iter()
        .map(|&name| {
            let b = baseline.get(name).expect("known metric");
            let c = candidate.get(name).expect("known metric");
            MetricChange {
                metric: name.to_owned(),
                baseline: b,
                candidate: c,
                absolute: c - b,
                relative_percent: (b > 0.0).then(|| 100.0 * (c - b) / b),
            }
        })
        .collect();
    Ok(ComparisonReport {
        baseline: baseline.clone(),
        candidate: candidate.clone(),
        changes,
    })
}

/// Rounds half up (toward +inf) at `places` decimals.
pub fn round_half_up(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    (x * scale + 0.5).floor() / scale
}

pub fn format_fixed(x: f64, places: u32) -> String {
    let r = round_half_up(x, places);
    format!("{:.*}", places as usize, if r == 0.0 { 0.0 } else { r })
}

/// `+7.63%`, `-1.20%`, `0.00%`, or `undefined`.
pub fn format_percent(change: Option<f64>) -> String {
    match change {
        None => "undefined".to_owned(),
        Some(x) => {
            let r = round_half_up(x, 2);
            if r == 0.0 {
                "0.00%".to_owned()
            } else if r > 0.0 {
                format!("+{r:.2}%")
            } else {
                format!("{r:.2}%")
            }
        }
    }
}

/// Aligned per-class and macro table for one report.
pub fn render_metrics(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
    for (label, c) in &report.per_class {
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>8}",
            label.as_str(),
            format_fixed(c.precision, 4),
            format_fixed(c.recall, 4),
            format_fixed(c.f1, 4),
            c.support
        );
    }
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>9} {:>8}",
        "macro",
        format_fixed(report.macro_precision, 4),
        format_fixed(report.macro_recall, 4),
        format_fixed(report.macro_f1, 4),
        report.test_size()
    );
    let _ = writeln!(out, "accuracy   {}", format_fixed(report.accuracy, 4));
    out
}
