//! Confusion matrices and the precision / recall / F1 / accuracy summary.
//!
//! Wetland is the positive class. Pixels that are nodata (255) in either
//! mask are left out of every count.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Mask, MASK_NODATA, WETLAND};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Adds one prediction / truth pair; nodata on either side is skipped.
    #[inline]
    pub fn record(&mut self, pred: u8, truth: u8) {
        if pred == MASK_NODATA || truth == MASK_NODATA {
            return;
        }
        match (pred == WETLAND, truth == WETLAND) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_pairs(pred: &[u8], truth: &[u8]) -> Self {
        let mut cm = Self::default();
        for (&p, &t) in pred.iter().zip(truth) {
            cm.record(p, t);
        }
        cm
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, tn: self.tn + o.tn, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

pub fn confusion(pred: &Mask, truth: &Mask) -> Result<ConfusionMatrix, MetricsError> {
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(MetricsError::Dimensions(pred.width(), pred.height(), truth.width(), truth.height()));
    }
    Ok(ConfusionMatrix::from_pairs(pred.values(), truth.values()))
}

/// Which summary values hit a 0/0 and were defined as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub accuracy: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.accuracy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub accuracy: T,
    pub degenerate: Degenerate,
}

fn ratio<T: Scalar>(num: u64, den: u64, flag: &mut bool) -> T {
    if den == 0 {
        *flag = true;
        T::zero()
    } else {
        T::from_u64(num).unwrap() / T::from_u64(den).unwrap()
    }
}

pub fn summarize<T: Scalar>(cm: &ConfusionMatrix) -> Summary<T> {
    let mut d = Degenerate::default();
    let precision: T = ratio(cm.tp, cm.tp + cm.fp, &mut d.precision);
    let recall: T = ratio(cm.tp, cm.tp + cm.fn_, &mut d.recall);
    let accuracy: T = ratio(cm.tp + cm.tn, cm.total(), &mut d.accuracy);
    let f1 = if precision + recall == T::zero() {
        d.f1 = true;
        T::zero()
    } else {
        T::lit(2.0) * precision * recall / (precision + recall)
    };
    Summary { precision, recall, f1, accuracy, degenerate: d }
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub zone: String,
    pub cm: ConfusionMatrix,
    pub summary: Summary<f64>,
}

impl MetricRow {
    pub fn new(model: impl Into<String>, zone: impl Into<String>, cm: ConfusionMatrix) -> Self {
        Self { model: model.into(), zone: zone.into(), summary: summarize(&cm), cm }
    }
}

pub const CSV_HEADER: &str = "model,zone,tn,fp,fn,tp,precision,recall,f1,accuracy";

/// RFC-4180 field quoting.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push_str("\r\n");
    for r in rows {
        let s = &r.summary;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\r\n",
            csv_field(&r.model),
            csv_field(&r.zone),
            r.cm.tn,
            r.cm.fp,
            r.cm.fn_,
            r.cm.tp,
            s.precision,
            s.recall,
            s.f1,
            s.accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_all_wetland() {
        let m = Mask::filled(3, 3, 1);
        let cm = confusion(&m, &m).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 9, tn: 0, fp: 0, fn_: 0 });
    }

    #[test]
    fn complement_has_no_hits() {
        let a = Mask::new(2, 2, vec![1, 0, 1, 0]).unwrap();
        let b = Mask::new(2, 2, vec![0, 1, 0, 1]).unwrap();
        let cm = confusion(&a, &b).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
    }

    #[test]
    fn hand_enumerated_two_by_two() {
        let pred = Mask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let truth = Mask::new(2, 2, vec![1, 0, 1, 0]).unwrap();
        assert_eq!(confusion(&pred, &truth).unwrap(), ConfusionMatrix::new(1, 1, 1, 1));
    }

    #[test]
    fn nodata_is_excluded() {
        let pred = Mask::new(3, 1, vec![1, 255, 0]).unwrap();
        let truth = Mask::new(3, 1, vec![255, 1, 0]).unwrap();
        let cm = confusion(&pred, &truth).unwrap();
        assert_eq!(cm.total(), 1);
        assert_eq!(cm.tn, 1);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(confusion(&Mask::filled(2, 1, 0), &Mask::filled(1, 2, 0)).is_err());
    }

    #[test]
    fn balanced_counts_give_halves() {
        let s: Summary<f64> = summarize(&ConfusionMatrix::new(1, 1, 1, 1));
        assert_eq!((s.precision, s.recall, s.f1, s.accuracy), (0.5, 0.5, 0.5, 0.5));
        assert!(!s.degenerate.any());
    }

    #[test]
    fn empty_matrix_is_flagged_not_nan() {
        let s: Summary<f64> = summarize(&ConfusionMatrix::default());
        assert_eq!((s.precision, s.recall, s.f1, s.accuracy), (0.0, 0.0, 0.0, 0.0));
        assert!(s.degenerate.precision && s.degenerate.recall && s.degenerate.f1 && s.degenerate.accuracy);
    }

    #[test]
    fn all_negative_predictions_flag_precision_only() {
        let s: Summary<f64> = summarize(&ConfusionMatrix::new(5, 0, 3, 0));
        assert!(s.degenerate.precision && !s.degenerate.recall);
        assert_eq!(s.recall, 0.0);
        assert!(s.degenerate.f1);
    }

    #[test]
    fn generic_over_f32() {
        let s: Summary<f32> = summarize(&ConfusionMatrix::new(695_391, 522_235, 255_792, 2_983_030));
        assert!((s.precision - 0.851).abs() < 1e-3);
    }

    #[test]
    fn csv_quotes_fields() {
        let row = MetricRow::new("rule, ndvi", "A", ConfusionMatrix::new(1, 1, 1, 1));
        let csv = rows_to_csv(&[row]);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains("\"rule, ndvi\",A,1,1,1,1,0.500000"));
    }
}
