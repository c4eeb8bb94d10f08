//! Confusion matrix and per-class classification report.
//!
//! Rows of the confusion matrix are actual classes, columns are predicted
//! classes. Ratios with an empty denominator are reported as 0.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::label::{GestureLabel, NUM_CLASSES};
use crate::model::{predict, ModelError, ModelParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted labels")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("{name} = {value} is outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("confusion csv line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self {
            counts: [[0; NUM_CLASSES]; NUM_CLASSES],
        }
    }
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, actual: GestureLabel, predicted: GestureLabel) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn get(&self, actual: GestureLabel, predicted: GestureLabel) -> u64 {
        self.counts[actual.index()][predicted.index()]
    }

    pub fn counts(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    fn column_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

pub fn confusion(
    actual: &[GestureLabel],
    predicted: &[GestureLabel],
) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        cm.record(a, p);
    }
    Ok(cm)
}

/// Predicts every sample of `dataset`. Frames the feature pipeline rejects
/// are skipped; their count is returned alongside the matrix.
pub fn evaluate(params: &ModelParams, dataset: &Dataset) -> (ConfusionMatrix, usize) {
    let mut cm = ConfusionMatrix::default();
    let mut skipped = 0;
    for sample in dataset.samples() {
        match predict(params, &sample.frame) {
            Ok(p) => cm.record(sample.label, p.label),
            Err(ModelError::Feature(_)) => skipped += 1,
            Err(e) => unreachable!("validated model rejected a frame: {e}"),
        }
    }
    (cm, skipped)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> Result<f64, EvalError> {
    for (name, value) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(EvalError::Domain { name, value });
        }
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    pub total_support: u64,
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class: Vec<ClassMetrics> = (0..NUM_CLASSES)
        .map(|c| {
            let hit = cm.counts[c][c];
            let support = cm.row_sum(c);
            let precision = ratio(hit, cm.column_sum(c));
            let recall = ratio(hit, support);
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall).expect("ratios lie in [0, 1]"),
                support,
            }
        })
        .collect();

    let n = NUM_CLASSES as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    Ok(EvalReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_avg: ClassMetrics {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            support: total,
        },
        weighted_avg: ClassMetrics {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
            support: total,
        },
        per_class,
        total_support: total,
    })
}

/// Two decimals, halves rounded up.
pub fn format_two_decimals(value: f64) -> String {
    // The small bias keeps decimal halves such as 0.145 (stored as
    // 0.14499999999999999) rounding up.
    let hundredths = (value * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", hundredths / 100.0)
}

/// Fixed-width classification report in the familiar
/// `precision recall f1-score support` layout.
pub fn render_report(report: &EvalReport) -> String {
    const NAME_WIDTH: usize = 12;
    let mut out = String::new();
    writeln!(
        out,
        "{:>NAME_WIDTH$} {:>9} {:>9} {:>9} {:>9}",
        "", "precision", "recall", "f1-score", "support"
    )
    .unwrap();
    out.push('\n');
    let row = |out: &mut String, name: &str, m: &ClassMetrics| {
        writeln!(
            out,
            "{name:>NAME_WIDTH$} {:>9} {:>9} {:>9} {:>9}",
            format_two_decimals(m.precision),
            format_two_decimals(m.recall),
            format_two_decimals(m.f1),
            m.support
        )
        .unwrap();
    };
    for (label, m) in GestureLabel::all().zip(&report.per_class) {
        row(&mut out, &label.to_string(), m);
    }
    out.push('\n');
    writeln!(
        out,
        "{:>NAME_WIDTH$} {:>9} {:>9} {:>9} {:>9}",
        "accuracy",
        "",
        "",
        format_two_decimals(report.accuracy),
        report.total_support
    )
    .unwrap();
    row(&mut out, "macro avg", &report.macro_avg);
    row(&mut out, "weighted avg", &report.weighted_avg);
    out
}

/// 27-line CSV: header `actual,A,...,Z`, then one row of counts per actual class.
pub fn render_confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("actual");
    for label in GestureLabel::all() {
        write!(out, ",{label}").unwrap();
    }
    out.push('\n');
    for (label, row) in GestureLabel::all().zip(&cm.counts) {
        out.push(label.letter());
        for count in row {
            write!(out, ",{count}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix, EvalError> {
    let mut lines = text.lines();
    let header = render_confusion_csv(&ConfusionMatrix::default());
    let expected_header = header.lines().next().expect("header");
    if lines.next() != Some(expected_header) {
        return Err(EvalError::Parse {
            line: 1,
            message: "bad header".into(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, label) in GestureLabel::all().enumerate() {
        let line_no = i + 2;
        let err = |message: String| EvalError::Parse { line: line_no, message };
        let line = lines.next().ok_or_else(|| err("missing row".into()))?;
        let mut fields = line.split(',');
        if fields.next() != Some(&label.to_string()) {
            return Err(err(format!("expected row for {label}")));
        }
        let row: Vec<u64> = fields
            .map(|f| f.parse().map_err(|_| err(format!("bad count {f:?}"))))
            .collect::<Result<_, _>>()?;
        if row.len() != NUM_CLASSES {
            return Err(err(format!("expected {NUM_CLASSES} counts, got {}", row.len())));
        }
        cm.counts[i].copy_from_slice(&row);
    }
    if lines.next().is_some() {
        return Err(EvalError::Parse {
            line: NUM_CLASSES + 2,
            message: "trailing data".into(),
        });
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(c: char) -> GestureLabel {
        GestureLabel::from_letter(c).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[l('A'), l('B'), l('C')], &[l('A'), l('B'), l('C')]).unwrap();
        assert_eq!(cm.trace(), 3);
        assert_eq!(cm.total(), 3);
        assert_eq!(cm.get(l('B'), l('B')), 1);

        let cm = confusion(&[l('A'), l('A')], &[l('B'), l('B')]).unwrap();
        assert_eq!(cm.get(l('A'), l('B')), 2);
        assert_eq!(cm.total(), 2);

        assert_eq!(confusion(&[], &[]), Err(EvalError::EmptyInput));
        assert!(matches!(confusion(&[l('A')], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(1.0, 1.0).unwrap(), 1.0);
        let m = f1_score(0.99, 1.0).unwrap();
        assert!((m - 0.994974874371859).abs() < 1e-12);
        assert_eq!(format_two_decimals(m), "0.99");
        assert_eq!(f1_score(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(f1_score(1.2, 0.5), Err(EvalError::Domain { name: "precision", .. })));
        assert!(matches!(f1_score(0.5, -0.1), Err(EvalError::Domain { name: "recall", .. })));
        assert!(f1_score(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn two_class_toy() {
        let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
        counts[0][0] = 8;
        counts[0][1] = 2;
        counts[1][1] = 10;
        let r = metrics_from_confusion(&ConfusionMatrix::from_counts(counts)).unwrap();
        let (a, b) = (r.per_class[0], r.per_class[1]);
        assert_eq!(a.precision, 1.0);
        assert_eq!(a.recall, 0.8);
        assert!((a.f1 - 16.0 / 18.0).abs() < 1e-15);
        assert!((b.precision - 10.0 / 12.0).abs() < 1e-15);
        assert_eq!(b.recall, 1.0);
        assert!((b.f1 - 2.0 * (10.0 / 12.0) / (10.0 / 12.0 + 1.0)).abs() < 1e-15);
        assert!((b.f1 - 0.909090909090909).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.9);
        assert_eq!((a.support, b.support), (10, 10));
        assert_eq!(r.per_class[2], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
        assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert_eq!(metrics_from_confusion(&ConfusionMatrix::default()), Err(EvalError::EmptyInput));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_two_decimals(0.994975), "0.99");
        assert_eq!(format_two_decimals(0.995), "1.00");
        assert_eq!(format_two_decimals(0.145), "0.15");
        assert_eq!(format_two_decimals(0.125), "0.13");
        assert_eq!(format_two_decimals(1.0), "1.00");
        assert_eq!(format_two_decimals(0.0), "0.00");
    }

    #[test]
    fn report_rows() {
        let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
        (0..NUM_CLASSES).for_each(|i| counts[i][i] = 900);
        let text = render_report(&metrics_from_confusion(&ConfusionMatrix::from_counts(counts)).unwrap());
        let rows: Vec<String> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        assert_eq!(rows[0], "precision recall f1-score support");
        assert_eq!(rows[1], "");
        assert_eq!(rows[2], "A 1.00 1.00 1.00 900");
        assert_eq!(rows[27], "Z 1.00 1.00 1.00 900");
        assert_eq!(rows[29], "accuracy 1.00 23400");
        assert_eq!(rows[30], "macro avg 1.00 1.00 1.00 23400");
        assert_eq!(rows[31], "weighted avg 1.00 1.00 1.00 23400");
        assert_eq!(text, render_report(&metrics_from_confusion(&ConfusionMatrix::from_counts(counts)).unwrap()));
    }

    #[test]
    fn confusion_csv_shapes() {
        let text = render_confusion_csv(&ConfusionMatrix::default());
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 27);
        assert!(lines[0].starts_with("actual,A,B,"));
        assert!(lines[1..].iter().all(|l| l.split(',').skip(1).all(|c| c == "0")));

        let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
        (0..NUM_CLASSES).for_each(|i| counts[i][i] = i as u64 + 1);
        let cm = ConfusionMatrix::from_counts(counts);
        let text = render_confusion_csv(&cm);
        let row_c: Vec<_> = text.lines().nth(3).unwrap().split(',').collect();
        assert_eq!(row_c[0], "C");
        assert_eq!(row_c[3], "3");
        assert_eq!(parse_confusion_csv(&text).unwrap(), cm);
        assert!(parse_confusion_csv("actual\n").is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = [[u64; NUM_CLASSES]; NUM_CLASSES]> {
        prop::collection::vec(0u64..20, NUM_CLASSES * NUM_CLASSES).prop_map(|v| {
            let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
            for (i, c) in v.into_iter().enumerate() {
                m[i / NUM_CLASSES][i % NUM_CLASSES] = c;
            }
            m[0][0] += 1;
            m
        })
    }

    proptest! {
        #[test]
        fn report_invariants(counts in arb_matrix()) {
            let cm = ConfusionMatrix::from_counts(counts);
            let r = metrics_from_confusion(&cm).unwrap();
            prop_assert_eq!(r.per_class.iter().map(|m| m.support).sum::<u64>(), cm.total());
            prop_assert_eq!(r.total_support, cm.total());
            prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
            for m in &r.per_class {
                prop_assert!(m.f1 >= 0.0);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-15);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-15 || m.f1 == 0.0);
                prop_assert_eq!(m.f1 == 1.0, m.precision == 1.0 && m.recall == 1.0);
            }
        }

        #[test]
        fn permutation_equivariance(counts in arb_matrix(), perm in Just((0..NUM_CLASSES).collect::<Vec<_>>()).prop_shuffle()) {
            let mut permuted = [[0; NUM_CLASSES]; NUM_CLASSES];
            for i in 0..NUM_CLASSES {
                for j in 0..NUM_CLASSES {
                    permuted[perm[i]][perm[j]] = counts[i][j];
                }
            }
            let a = metrics_from_confusion(&ConfusionMatrix::from_counts(counts)).unwrap();
            let b = metrics_from_confusion(&ConfusionMatrix::from_counts(permuted)).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(a.per_class[i], b.per_class[p]);
            }
            prop_assert!((a.macro_avg.f1 - b.macro_avg.f1).abs() < 1e-12);
            prop_assert!((a.macro_avg.precision - b.macro_avg.precision).abs() < 1e-12);
            prop_assert!((a.weighted_avg.f1 - b.weighted_avg.f1).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }
    }
}
