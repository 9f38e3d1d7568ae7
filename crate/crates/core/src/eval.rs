//! Binary classification metrics and result tables.
//!
//! Deceptive is the positive class. Zero denominators follow one rule:
//! precision or recall over an empty set is 0, and F1 of (0, 0) is 0.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    pub f1_negative: f64,
    pub f1_macro: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_acc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let n = tp + fp + fn_ + tn;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1_positive = f1(precision, recall);
        let f1_negative = f1(ratio(tn, tn + fn_), ratio(tn, tn + fp));
        MetricsReport {
            tp,
            fp,
            fn_,
            tn,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1_positive,
            f1_negative,
            f1_macro: (f1_positive + f1_negative) / 2.0,
            baseline_name: None,
            delta_f1: None,
            delta_acc: None,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Attaches point deltas against `baseline` under the given name.
    pub fn with_baseline(mut self, name: &str, baseline: &MetricsReport) -> Self {
        self.delta_f1 = Some(improvement(baseline, &self));
        self.delta_acc = Some(round2(100.0 * (self.accuracy - baseline.accuracy)));
        self.baseline_name = Some(name.to_string());
        self
    }
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<MetricsReport> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut cells = [[0usize; 2]; 2];
    for (&p, &y) in predictions.iter().zip(labels) {
        cells[y.index()][p.index()] += 1;
    }
    Ok(MetricsReport::from_counts(cells[1][1], cells[0][1], cells[1][0], cells[0][0]))
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Positive-class F1 difference in points (F1 scaled to 0..100), to two decimals.
pub fn improvement(baseline: &MetricsReport, augmented: &MetricsReport) -> f64 {
    round2(100.0 * (augmented.f1_positive - baseline.f1_positive))
}

/// Rows are target domains, columns are the baseline followed by ILC
/// combinations; a `None` cell is a combination that does not apply to the row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<MetricsReport>>>,
}

impl ReportGrid {
    pub fn new(rows: Vec<String>, columns: Vec<String>, cells: Vec<Vec<Option<MetricsReport>>>) -> Result<Self> {
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::InvalidArgument(format!(
                "grid cells do not match {} rows x {} columns",
                rows.len(),
                columns.len()
            )));
        }
        Ok(ReportGrid { rows, columns, cells })
    }

    /// Column index of the best F1 in a row (first one on ties).
    pub fn best_in_row(&self, row: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, cell) in self.cells[row].iter().enumerate() {
            if let Some(r) = cell {
                if best.is_none_or(|(_, f)| r.f1_positive > f) {
                    best = Some((j, r.f1_positive));
                }
            }
        }
        best.map(|(j, _)| j)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedTable {
    pub markdown: String,
    pub csv: String,
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Markdown and CSV renderings with F1 and ACC per column, in percent to two
/// decimals. The best F1 of each row is bold in Markdown and named in the
/// CSV `best_f1` column.
pub fn render_table(grid: &ReportGrid) -> RenderedTable {
    let mut md = String::from("| Domain |");
    let mut csv = String::from("domain");
    for c in &grid.columns {
        md.push_str(&format!(" {c} F1 | {c} ACC |"));
        csv.push_str(&format!(",{c} F1,{c} ACC"));
    }
    csv.push_str(",best_f1\n");
    md.push_str("\n|---|");
    md.push_str(&"---:|---:|".repeat(grid.columns.len()));
    md.push('\n');

    for (i, row) in grid.rows.iter().enumerate() {
        let best = grid.best_in_row(i);
        md.push_str(&format!("| {row} |"));
        csv.push_str(row);
        for (j, cell) in grid.cells[i].iter().enumerate() {
            match cell {
                Some(r) => {
                    let f = pct(r.f1_positive);
                    if best == Some(j) {
                        md.push_str(&format!(" **{f}** | {} |", pct(r.accuracy)));
                    } else {
                        md.push_str(&format!(" {f} | {} |", pct(r.accuracy)));
                    }
                    csv.push_str(&format!(",{f},{}", pct(r.accuracy)));
                }
                None => {
                    md.push_str(" -- | -- |");
                    csv.push_str(",--,--");
                }
            }
        }
        md.push('\n');
        csv.push(',');
        if let Some(j) = best {
            csv.push_str(&grid.columns[j]);
        }
        csv.push('\n');
    }
    RenderedTable { markdown: md, csv }
}
