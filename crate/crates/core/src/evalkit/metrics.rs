//! Classification accuracy, F1 and execution success over joined verdicts.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EvalError, EvalRecord, ReviewStatus, SystemVerdict};
use crate::pipeline::TaskClass;
use crate::scalar::Scalar;

/// Published comparison figures shown under the text report: label,
/// accuracy, F1, execution success.
pub const REFERENCE_ROW: (&str, f64, f64, f64) = ("reference (GPT-4o, published)", 0.9512, 0.9467, 0.9045);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + DeserializeOwned")]
pub struct ClassMetrics<T: Scalar> {
    pub class: TaskClass,
    /// Gold records of this class.
    pub support: u64,
    pub predicted: u64,
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + DeserializeOwned")]
pub struct MetricsReport<T: Scalar> {
    pub n: u64,
    pub accuracy: T,
    /// Mean F1 over classes with gold support.
    pub macro_f1: T,
    pub micro_f1: T,
    pub execution_success_rate: T,
    pub per_class: Vec<ClassMetrics<T>>,
    /// `confusion[gold - 1][predicted - 1]`.
    pub confusion: [[u64; 7]; 7],
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::of_count(num as usize) / T::of_count(den as usize)
    }
}

impl<T: Scalar> MetricsReport<T> {
    /// Metrics from a confusion matrix and the count of valid outputs.
    pub fn from_confusion(confusion: [[u64; 7]; 7], valid_outputs: u64) -> Self {
        let n: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..7).map(|k| confusion[k][k]).sum();
        let mut per_class = Vec::with_capacity(7);
        let (mut f1_sum, mut present) = (T::zero(), 0usize);
        for (k, class) in TaskClass::ALL.into_iter().enumerate() {
            let tp = confusion[k][k];
            let support: u64 = confusion[k].iter().sum();
            let predicted: u64 = (0..7).map(|g| confusion[g][k]).sum();
            let precision: T = ratio(tp, predicted);
            let recall: T = ratio(tp, support);
            let f1 = if precision + recall == T::zero() {
                T::zero()
            } else {
                T::lit(2.0) * precision * recall / (precision + recall)
            };
            if support > 0 {
                f1_sum = f1_sum + f1;
                present += 1;
            }
            per_class.push(ClassMetrics {
                class,
                support,
                predicted,
                precision,
                recall,
                f1,
            });
        }
        let accuracy = ratio(correct, n);
        Self {
            n,
            accuracy,
            macro_f1: if present == 0 {
                T::zero()
            } else {
                f1_sum / T::of_count(present)
            },
            // Single-label micro-F1: pooled TP over pooled TP + FP.
            micro_f1: accuracy,
            execution_success_rate: ratio(valid_outputs, n),
            per_class,
            confusion,
        }
    }
}

/// Joins verdicts to records and scores the approved ones. A verdict with
/// no record is a `Join` error; verdicts for unapproved records are skipped.
pub fn score<T: Scalar>(verdicts: &[SystemVerdict], records: &[EvalRecord]) -> Result<MetricsReport<T>, EvalError> {
    let by_id: HashMap<&str, &EvalRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut confusion = [[0u64; 7]; 7];
    let mut valid = 0;
    for v in verdicts {
        let rec = by_id
            .get(v.record_id.as_str())
            .ok_or_else(|| EvalError::Join(v.record_id.clone()))?;
        if rec.review_status != ReviewStatus::Approved {
            continue;
        }
        confusion[rec.gold_class.number() as usize - 1][v.predicted_class.number() as usize - 1] += 1;
        valid += u64::from(v.valid_output());
    }
    Ok(MetricsReport::from_confusion(confusion, valid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

pub fn report<T: Scalar + Serialize + DeserializeOwned>(metrics: &MetricsReport<T>, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(metrics).expect("metrics serialize"),
        ReportFormat::Text => text_report(metrics),
    }
}

fn text_report<T: Scalar>(m: &MetricsReport<T>) -> String {
    let f = |x: T| format!("{:.4}", x.to_f64_lossy());
    let mut s = String::new();
    let _ = writeln!(s, "Task classification and execution, n = {}", m.n);
    let _ = writeln!(
        s,
        "F1 = macro-F1 over classes present in the gold labels; micro-F1 listed separately."
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<32}{:>8}{:>8}{:>10}{:>15}",
        "System", "Acc.", "F1", "Micro-F1", "Exec. Success"
    );
    let _ = writeln!(
        s,
        "{:<32}{:>8}{:>8}{:>10}{:>15}",
        "this run",
        f(m.accuracy),
        f(m.macro_f1),
        f(m.micro_f1),
        f(m.execution_success_rate)
    );
    let (label, acc, f1, exec) = REFERENCE_ROW;
    let _ = writeln!(s, "{label:<32}{acc:>8.4}{f1:>8.4}{:>10}{exec:>15.4}", "-");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<7}{:>9}{:>11}{:>11}{:>9}{:>9}",
        "Class", "Support", "Predicted", "Precision", "Recall", "F1"
    );
    for c in &m.per_class {
        let _ = writeln!(
            s,
            "{:<7}{:>9}{:>11}{:>11}{:>9}{:>9}",
            c.class.number(),
            c.support,
            c.predicted,
            f(c.precision),
            f(c.recall),
            f(c.f1)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Confusion (rows: gold 1-7, columns: predicted 1-7)");
    for row in &m.confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
        let _ = writeln!(s, "{}", cells.join(""));
    }
    s
}
