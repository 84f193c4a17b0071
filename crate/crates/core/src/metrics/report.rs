use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{percent_1dp, BinaryCounts, ConfusionMatrix, Rate};
use crate::skeleton::{GestureId, GestureKind};

/// Headline numbers of one protocol over one evaluation scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub static_accuracy: Rate,
    pub dynamic_accuracy: Rate,
    /// Unweighted mean of the static and dynamic accuracies.
    pub average_accuracy: Rate,
    /// One-vs-rest protocol only: mean of the 29 per-class binary accuracies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_binary_accuracy: Option<f64>,
}

impl ProtocolSummary {
    pub fn from_confusions(
        static_cm: &ConfusionMatrix,
        dynamic_cm: &ConfusionMatrix,
        mean_binary_accuracy: Option<f64>,
    ) -> Self {
        let s = static_cm.accuracy();
        let d = dynamic_cm.accuracy();
        let average = match (s.0, d.0) {
            (Some(a), Some(b)) => Rate(Some(super::average_static_dynamic(a, b))),
            _ => Rate(None),
        };
        Self {
            static_accuracy: s,
            dynamic_accuracy: d,
            average_accuracy: average,
            mean_binary_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: u8,
    pub train_patients: Vec<u32>,
    pub test_patients: Vec<u32>,
    pub n_train_sequences: usize,
    pub n_test_sequences: usize,
    pub summary: ProtocolSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: GestureId,
    pub kind: GestureKind,
    pub support: u64,
    pub precision: Rate,
    pub recall: Rate,
    /// Outcome counts of this class's one-vs-rest classifier, when trained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryCounts>,
}

/// Cross-validated evaluation of one run, pooled over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: String,
    /// Free-form description of the run (configuration, seed, data checksum).
    pub run: serde_json::Value,
    pub summary: ProtocolSummary,
    pub folds: Vec<FoldResult>,
    pub per_class: Vec<ClassMetrics>,
    pub confusion_static: ConfusionMatrix,
    pub confusion_dynamic: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Pretty-printed JSON of the full report.
    Json,
    /// Human-readable summary and per-class table.
    Text,
    /// Summary table, one row per fold plus the pooled row.
    Csv,
}

fn pct(r: Rate) -> String {
    r.0.map(percent_1dp).unwrap_or_else(|| "n/a".to_string())
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Confusion matrix as a CSV grid: a header row of predicted classes, then
/// one row per true class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut header = vec!["true\\pred".to_string()];
    header.extend(cm.class_names.iter().cloned());
    let rows: Vec<Vec<String>> = cm
        .class_names
        .iter()
        .zip(&cm.counts)
        .map(|(name, row)| {
            std::iter::once(name.clone())
                .chain(row.iter().map(u64::to_string))
                .collect()
        })
        .collect();
    String::from_utf8(csv_bytes(&header, &rows)).expect("csv output is UTF-8")
}

fn summary_row(scope: String, s: &ProtocolSummary) -> Vec<String> {
    vec![
        scope,
        pct(s.static_accuracy),
        pct(s.dynamic_accuracy),
        pct(s.average_accuracy),
        s.mean_binary_accuracy
            .map(percent_1dp)
            .unwrap_or_else(|| "n/a".into()),
    ]
}

/// Serializes a report. Output is a pure function of the report.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report is serializable");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let header = [
                "scope",
                "static_pct",
                "dynamic_pct",
                "average_pct",
                "mean_binary_pct",
            ]
            .map(String::from);
            let mut rows: Vec<Vec<String>> = report
                .folds
                .iter()
                .map(|f| summary_row(format!("fold{}", f.fold), &f.summary))
                .collect();
            rows.push(summary_row("pooled".into(), &report.summary));
            csv_bytes(&header, &rows)
        }
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

fn render_text(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "protocol: {}", r.protocol);
    let _ = writeln!(
        s,
        "pooled: static {}%  dynamic {}%  average {}%",
        pct(r.summary.static_accuracy),
        pct(r.summary.dynamic_accuracy),
        pct(r.summary.average_accuracy)
    );
    if let Some(b) = r.summary.mean_binary_accuracy {
        let _ = writeln!(s, "mean one-vs-rest accuracy: {}%", percent_1dp(b));
    }
    for f in &r.folds {
        let _ = writeln!(
            s,
            "fold {}: {} test patients, {} test gestures: static {}%  dynamic {}%  average {}%",
            f.fold,
            f.test_patients.len(),
            f.n_test_sequences,
            pct(f.summary.static_accuracy),
            pct(f.summary.dynamic_accuracy),
            pct(f.summary.average_accuracy)
        );
    }
    let _ = writeln!(s, "\n{:<6} {:<8} {:>7} {:>9} {:>7}", "class", "kind", "support", "precision", "recall");
    for c in &r.per_class {
        let _ = writeln!(
            s,
            "{:<6} {:<8} {:>7} {:>9} {:>7}",
            c.class.as_str(),
            c.kind.to_string(),
            c.support,
            pct(c.precision),
            pct(c.recall)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::confusion;

    fn named(cm: ConfusionMatrix, kind: GestureKind) -> ConfusionMatrix {
        ConfusionMatrix {
            class_names: GestureId::of_kind(kind).iter().map(|g| g.to_string()).collect(),
            ..cm
        }
    }

    fn sample() -> EvaluationReport {
        let s_preds: Vec<usize> = (0..15).map(|i| if i == 3 { 4 } else { i }).collect();
        let s_labels: Vec<usize> = (0..15).collect();
        let cs = named(confusion(&s_preds, &s_labels, 15).unwrap(), GestureKind::Static);
        let d: Vec<usize> = (0..14).collect();
        let cd = named(confusion(&d, &d, 14).unwrap(), GestureKind::Dynamic);
        let summary = ProtocolSummary::from_confusions(&cs, &cd, None);
        let per_class = GestureId::of_kind(GestureKind::Static)
            .into_iter()
            .enumerate()
            .map(|(i, g)| ClassMetrics {
                class: g,
                kind: g.kind(),
                support: cs.support(i),
                precision: cs.precision(i),
                recall: cs.recall(i),
                binary: None,
            })
            .collect();
        EvaluationReport {
            protocol: "multiclass".into(),
            run: serde_json::json!({"seed": 1}),
            summary,
            folds: vec![FoldResult {
                fold: 1,
                train_patients: vec![2, 3],
                test_patients: vec![1],
                n_train_sequences: 58,
                n_test_sequences: 29,
                summary,
            }],
            per_class,
            confusion_static: cs,
            confusion_dynamic: cd,
        }
    }

    #[test]
    fn average_is_mean_of_parts() {
        let r = sample();
        let s = r.summary.static_accuracy.0.unwrap();
        let d = r.summary.dynamic_accuracy.0.unwrap();
        assert_eq!(r.summary.average_accuracy.0.unwrap(), (s + d) / 2.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let r = sample();
        for f in [ReportFormat::Json, ReportFormat::Text, ReportFormat::Csv] {
            assert_eq!(render_report(&r, f), render_report(&r, f));
        }
    }

    #[test]
    fn json_roundtrip() {
        let r = sample();
        let bytes = render_report(&r, ReportFormat::Json);
        let back: EvaluationReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn confusion_csv_has_header_plus_k_rows() {
        let r = sample();
        let text = confusion_csv(&r.confusion_static);
        assert_eq!(text.lines().count(), 16);
        assert!(text.starts_with("true\\pred,A1_1,"));
    }

    #[test]
    fn undefined_precision_renders_as_na() {
        let r = sample();
        // Class 3 was never predicted.
        assert_eq!(r.per_class[3].precision, Rate(None));
        let json = String::from_utf8(render_report(&r, ReportFormat::Json)).unwrap();
        assert!(json.contains("\"precision\": \"n/a\""));
        let text = String::from_utf8(render_report(&r, ReportFormat::Text)).unwrap();
        assert!(text.contains("n/a"));
    }

    #[test]
    fn csv_summary_rows() {
        let r = sample();
        let text = String::from_utf8(render_report(&r, ReportFormat::Csv)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "pooled,93.3,100.0,96.7,n/a");
    }
}
