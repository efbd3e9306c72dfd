use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ClassId;
use crate::error::{Error, Result};

fn check(pred: &[ClassId], truth: &[ClassId]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("metrics need at least one item".into()));
    }
    Ok(())
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[ClassId], truth: &[ClassId]) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Support-weighted mean of per-class F1 over the classes present in `truth`.
/// A class with `P + R = 0` scores 0.
pub fn weighted_f1(pred: &[ClassId], truth: &[ClassId]) -> Result<f64> {
    check(pred, truth)?;
    #[derive(Default)]
    struct Counts {
        tp: usize,
        predicted: usize,
        support: usize,
    }
    let mut per_class: BTreeMap<ClassId, Counts> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        per_class.entry(p).or_default().predicted += 1;
        let c = per_class.entry(t).or_default();
        c.support += 1;
        if p == t {
            c.tp += 1;
        }
    }
    let n = truth.len() as f64;
    let score = per_class
        .values()
        .filter(|c| c.support > 0)
        .map(|c| {
            let precision = if c.predicted == 0 { 0.0 } else { c.tp as f64 / c.predicted as f64 };
            let recall = c.tp as f64 / c.support as f64;
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            f1 * c.support as f64 / n
        })
        .sum();
    Ok(score)
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }

    /// `mean (std)` as percentages with two decimals, e.g. `75.17 (5.52)`.
    pub fn percent(&self) -> String {
        format!("{:.2} ({:.2})", self.mean * 100.0, self.std * 100.0)
    }
}
