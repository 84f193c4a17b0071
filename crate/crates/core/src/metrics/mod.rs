//! Classification metrics: confusion matrices, accuracy, precision/recall,
//! static/dynamic averaging and one-vs-rest suite summaries.

mod report;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use report::{
    confusion_csv, render_report, ClassMetrics, EvaluationReport, FoldResult, ProtocolSummary,
    ReportFormat,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class index {index} out of range for {k} classes")]
    ClassOutOfRange { index: usize, k: usize },
    #[error("cannot merge confusion matrices of different classes")]
    ClassMismatch,
}

/// A rate in `[0, 1]` that may be undefined (zero denominator).
///
/// Serializes as a number or the string `"n/a"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rate(pub Option<f64>);

impl Rate {
    pub fn ratio(num: u64, den: u64) -> Self {
        Rate((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("n/a"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("n/a"),
        }
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Rate(Some(v))),
            Raw::Text(t) if t == "n/a" => Ok(Rate(None)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid rate {t:?}"))),
        }
    }
}

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Counts (prediction, label) pairs into a `k x k` matrix.
pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::empty((0..k).map(|i| i.to_string()).collect());
    for (&p, &l) in preds.iter().zip(labels) {
        cm.record(l, p)?;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn empty(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<(), MetricsError> {
        let k = self.k();
        for index in [truth, pred] {
            if index >= k {
                return Err(MetricsError::ClassOutOfRange { index, k });
            }
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if self.class_names != other.class_names {
            return Err(MetricsError::ClassMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`; undefined for an empty matrix.
    pub fn accuracy(&self) -> Rate {
        Rate::ratio(self.trace(), self.total())
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn recall(&self, class: usize) -> Rate {
        Rate::ratio(self.counts[class][class], self.support(class))
    }

    pub fn precision(&self, class: usize) -> Rate {
        Rate::ratio(self.counts[class][class], self.predicted(class))
    }
}

/// Unweighted mean of the static and dynamic accuracies.
pub fn average_static_dynamic(static_acc: f64, dynamic_acc: f64) -> f64 {
    (static_acc + dynamic_acc) / 2.0
}

/// Outcome counts of one binary (one-vs-rest) classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn record(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, o: &BinaryCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Rate {
        Rate::ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Rate {
        Rate::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Rate {
        Rate::ratio(self.tp, self.tp + self.fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySuiteSummary {
    /// Unweighted mean of the per-class binary accuracies.
    pub mean_accuracy: f64,
    pub accuracy: Vec<Rate>,
    pub precision: Vec<Rate>,
    pub recall: Vec<Rate>,
}

/// Summarizes a suite of one-vs-rest classifiers, one entry per class.
/// Classifiers with no evaluated samples are left out of the mean.
pub fn binary_suite_metrics(results: &[BinaryCounts]) -> BinarySuiteSummary {
    let accuracy: Vec<Rate> = results.iter().map(BinaryCounts::accuracy).collect();
    let defined: Vec<f64> = accuracy.iter().filter_map(|r| r.0).collect();
    let mean_accuracy = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    BinarySuiteSummary {
        mean_accuracy,
        accuracy,
        precision: results.iter().map(BinaryCounts::precision).collect(),
        recall: results.iter().map(BinaryCounts::recall).collect(),
    }
}

/// Percentage with one decimal, rounding halves up: 0.6125 -> "61.3".
pub fn percent_1dp(rate: f64) -> String {
    // Nudge by a few ulps so binary representations of exact halves
    // (0.6125 is stored as 0.61249999...) still round up.
    let tenths = (rate * 1000.0 * (1.0 + 4.0 * f64::EPSILON) + 0.5).floor();
    format!("{:.1}", tenths / 10.0)
}
