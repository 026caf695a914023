//! Metrics, precision-recall curves, cross-validation, feature importance
//! and ablation.

mod cv;
mod forest;
pub mod report;

pub use cv::{
    ablation_curve, cross_validate, evaluate_matrices, fold_matrices, importance_on_folds, oof_matrix, AblationCurve,
    AblationStep, CvReport, FoldMatrices, FoldResult,
};
pub use forest::{forest_importance, tree_importance, ForestParams, ImportanceReport};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Confusion counts with abuse as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f_measure: f_of(precision, recall),
        }
    }
}

pub fn compute_metrics(preds: &[Label], truth: &[Label]) -> Result<Metrics> {
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: preds.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, t) in preds.iter().zip(truth) {
        match (p.is_abuse(), t.is_abuse()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Unweighted mean of per-fold precision, recall and F; counts are summed.
pub fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let n = folds.len().max(1) as f64;
    let sum = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
    Metrics {
        tp: folds.iter().map(|m| m.tp).sum(),
        fp: folds.iter().map(|m| m.fp).sum(),
        fn_: folds.iter().map(|m| m.fn_).sum(),
        tn: folds.iter().map(|m| m.tn).sum(),
        precision: sum(|m| m.precision),
        recall: sum(|m| m.recall),
        f_measure: sum(|m| m.f_measure),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Points sorted by decreasing threshold; a message is flagged when its
/// probability is at least the threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// (precision, recall) when flagging every probability `>= threshold`.
pub fn precision_recall_at(probs: &[f64], truth: &[Label], threshold: f64) -> (f64, f64) {
    let mut tp = 0;
    let mut fp = 0;
    let positives = truth.iter().filter(|l| l.is_abuse()).count();
    for (p, t) in probs.iter().zip(truth) {
        if *p >= threshold {
            if t.is_abuse() {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    (ratio(tp, tp + fp), ratio(tp, positives))
}

pub fn pr_curve(probs: &[f64], truth: &[Label]) -> Result<PrCurve> {
    if probs.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: probs.len(),
        });
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Validation(format!("probability {p} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let positives = truth.iter().filter(|l| l.is_abuse()).count();
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let t = probs[order[i]];
        while i < order.len() && probs[order[i]] == t {
            if truth[order[i]].is_abuse() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, positives),
        });
    }
    Ok(PrCurve { points })
}

impl PrCurve {
    /// Highest precision among points with recall at least `r`, 0 if none.
    pub fn interpolated_precision(&self, r: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.recall >= r - 1e-12)
            .map(|p| p.precision)
            .fold(0.0, f64::max)
    }
}

/// Mean interpolated precision over `grid` evenly spaced recall levels
/// from 0 to 1; returns (recall, precision) pairs.
pub fn average_pr(curves: &[PrCurve], grid: usize) -> Vec<(f64, f64)> {
    let grid = grid.max(2);
    (0..grid)
        .map(|j| {
            let r = j as f64 / (grid - 1) as f64;
            let mean = curves.iter().map(|c| c.interpolated_precision(r)).sum::<f64>() / curves.len().max(1) as f64;
            (r, mean)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::from_bool(b == 1)).collect()
    }

    #[test]
    fn arithmetic() {
        let m = Metrics::from_counts(3, 1, 2, 0);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f_measure - 2.0 / 3.0).abs() < 1e-12);
        let t = labels(&[1, 0, 1, 0]);
        let perfect = compute_metrics(&t, &t).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f_measure), (1.0, 1.0, 1.0));
        let none = compute_metrics(&labels(&[0, 0, 0, 0]), &t).unwrap();
        assert_eq!((none.precision, none.recall, none.f_measure), (0.0, 0.0, 0.0));
        assert!(compute_metrics(&t[..2], &t).is_err());
    }

    #[test]
    fn brute_force_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let n = rng.gen_range(0..20);
            let p: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen())).collect();
            let t: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen())).collect();
            let m = compute_metrics(&p, &t).unwrap();
            let count = |a: bool, b: bool| p.iter().zip(&t).filter(|(x, y)| x.is_abuse() == a && y.is_abuse() == b).count();
            assert_eq!((m.tp, m.fp, m.fn_, m.tn), (count(true, true), count(true, false), count(false, true), count(false, false)));
        }
    }

    #[test]
    fn curve_example() {
        let probs = [0.9, 0.8, 0.4, 0.2];
        let t = labels(&[1, 1, 0, 1]);
        let c = pr_curve(&probs, &t).unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((last.threshold, last.precision, last.recall), (0.2, 0.75, 1.0));
        assert_eq!(precision_recall_at(&probs, &t, 0.95), (0.0, 0.0));
        assert_eq!(c.points.len(), 4);
    }

    #[test]
    fn perfect_ranking_dominates() {
        let probs = [0.9, 0.8, 0.3, 0.1];
        let t = labels(&[1, 1, 0, 0]);
        let c = pr_curve(&probs, &t).unwrap();
        for p in &c.points {
            if p.recall < 1.0 {
                assert_eq!(p.precision, 1.0);
            }
        }
        assert_eq!(c.interpolated_precision(1.0), 1.0);
    }

    #[test]
    fn mean_of_folds() {
        let folds = [Metrics::from_counts(3, 1, 2, 4), Metrics::from_counts(5, 0, 0, 5)];
        let m = mean_metrics(&folds);
        assert!((m.f_measure - (folds[0].f_measure + folds[1].f_measure) / 2.0).abs() < 1e-12);
        assert_eq!(m.tp, 8);
    }

    proptest! {
        #[test]
        fn curve_invariants(v in proptest::collection::vec((0u8..=20, any::<bool>()), 1..40)) {
            let probs: Vec<f64> = v.iter().map(|(p, _)| *p as f64 / 20.0).collect();
            let t: Vec<Label> = v.iter().map(|(_, a)| Label::from_bool(*a)).collect();
            let c = pr_curve(&probs, &t).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].recall >= w[0].recall);
            }
            let min = probs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let positives = t.iter().filter(|l| l.is_abuse()).count();
            let (p, r) = precision_recall_at(&probs, &t, min);
            prop_assert_eq!(p, positives as f64 / t.len() as f64);
            if positives > 0 {
                prop_assert_eq!(r, 1.0);
            }
            prop_assert_eq!(precision_recall_at(&probs, &t, max + 1e-9).1, 0.0);

            let other = PrCurve { points: c.points.iter().map(|q| PrPoint { precision: q.precision * 0.5, ..*q }).collect() };
            let avg = average_pr(&[c.clone(), other.clone()], 101);
            for (r, m) in avg {
                let a = c.interpolated_precision(r);
                let b = other.interpolated_precision(r);
                prop_assert!(m >= a.min(b) - 1e-12 && m <= a.max(b) + 1e-12);
            }
        }
    }
}
