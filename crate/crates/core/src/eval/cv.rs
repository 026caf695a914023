//! K-fold cross-validation over prepared datasets, plus the importance and
//! ablation experiments that reuse its per-fold feature matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{tree_importance, ForestParams, ImportanceReport};
use super::{compute_metrics, mean_metrics, pr_curve, Metrics, PrCurve};
use crate::config::RunConfig;
use crate::corpus::{kfold_labels, Label};
use crate::error::{Error, Result};
use crate::features::{feature_index, FEATURE_NAMES};
use crate::pipeline::{Classifier, Prepared, Stages};

/// Registry rows of one fold, with the trained stages applied.
#[derive(Debug, Clone)]
pub struct FoldMatrices {
    pub fold: usize,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<Label>,
    pub x_test: Vec<Vec<f64>>,
    pub y_test: Vec<Label>,
    /// Size of the vocabulary learned on the training part.
    pub vocabulary_size: usize,
}

/// Trains the text stages inside every fold and builds the fold's matrices.
pub fn fold_matrices(prepared: &Prepared, cfg: &RunConfig) -> Result<Vec<FoldMatrices>> {
    let folds = kfold_labels(&prepared.labels, cfg.k_folds, cfg.seed)?;
    folds
        .into_par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let stages = Stages::train(prepared, &fold.train, cfg)?;
            Ok(FoldMatrices {
                fold: f,
                x_train: prepared.rows(&stages, &fold.train, false),
                y_train: prepared.labels_of(&fold.train),
                x_test: prepared.rows(&stages, &fold.test, true),
                y_test: prepared.labels_of(&fold.test),
                vocabulary_size: stages.nb.vocabulary.len(),
                train_idx: fold.train,
                test_idx: fold.test,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub scores: Vec<f64>,
    pub probs: Option<Vec<f64>>,
    pub truth: Vec<Label>,
    pub test_idx: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of the per-fold precision, recall and F.
    pub mean: Metrics,
}

impl CvReport {
    /// One curve per fold over the calibrated probabilities.
    pub fn pr_curves(&self) -> Result<Vec<PrCurve>> {
        self.folds
            .iter()
            .map(|f| {
                let probs = f
                    .probs
                    .as_ref()
                    .ok_or_else(|| Error::MissingResource("calibrated probabilities".into()))?;
                pr_curve(probs, &f.truth)
            })
            .collect()
    }
}

/// Trains an SVM on each fold's training rows restricted to `features` and
/// scores its test rows. Predictions use the sign of the decision score.
pub fn evaluate_matrices(mats: &[FoldMatrices], features: &[usize], cfg: &RunConfig, calibrate: bool) -> Result<CvReport> {
    let folds: Vec<FoldResult> = mats
        .par_iter()
        .map(|m| {
            let clf = Classifier::train(&m.x_train, &m.y_train, features, cfg, calibrate)?;
            let scores: Vec<f64> = m.x_test.iter().map(|r| clf.decision(r)).collect::<Result<_>>()?;
            let preds: Vec<Label> = scores.iter().map(|&s| Label::from_bool(s > 0.0)).collect();
            let probs = clf
                .platt
                .map(|p| scores.iter().map(|&s| p.probability(s)).collect());
            Ok(FoldResult {
                fold: m.fold,
                metrics: compute_metrics(&preds, &m.y_test)?,
                scores,
                probs,
                truth: m.y_test.clone(),
                test_idx: m.test_idx.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let per_fold: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(CvReport {
        mean: mean_metrics(&per_fold),
        folds,
    })
}

/// Full cross-validation of the configured arm with calibrated outputs.
pub fn cross_validate(prepared: &Prepared, cfg: &RunConfig) -> Result<CvReport> {
    let mats = fold_matrices(prepared, cfg)?;
    evaluate_matrices(&mats, &cfg.arm.feature_indices(), cfg, true)
}

/// Test rows of every fold, i.e. each item once with stages it was not
/// trained on, ordered by dataset index. Columns restricted to `features`.
pub fn oof_matrix(mats: &[FoldMatrices], features: &[usize]) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rows: Vec<(usize, Vec<f64>, Label)> = mats
        .iter()
        .flat_map(|m| {
            m.test_idx
                .iter()
                .zip(&m.x_test)
                .zip(&m.y_test)
                .map(|((&i, r), &l)| (i, features.iter().map(|&j| r[j]).collect(), l))
        })
        .collect();
    rows.sort_by_key(|(i, _, _)| *i);
    rows.into_iter().map(|(_, r, l)| (r, l)).unzip()
}

/// Tree-ensemble importances on the out-of-fold matrix.
pub fn importance_on_folds(
    mats: &[FoldMatrices],
    features: &[usize],
    runs: usize,
    seed: u64,
    params: &ForestParams,
) -> Result<ImportanceReport> {
    let (x, y) = oof_matrix(mats, features);
    let y: Vec<bool> = y.iter().map(|l| l.is_abuse()).collect();
    let names: Vec<String> = features.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect();
    tree_importance(&x, &y, &names, runs, seed, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationStep {
    pub step: usize,
    pub removed_feature: String,
    pub remaining: usize,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCurve {
    /// F with every feature of the report present.
    pub baseline_f: f64,
    pub steps: Vec<AblationStep>,
    /// The feature never removed.
    pub last_feature: String,
}

/// Removes features in increasing order of mean importance, retraining and
/// evaluating the SVM after each removal until one feature remains.
pub fn ablation_curve(mats: &[FoldMatrices], report: &ImportanceReport, cfg: &RunConfig) -> Result<AblationCurve> {
    let mut order: Vec<&str> = report.ranking();
    order.reverse();
    let indices: Vec<usize> = order
        .iter()
        .map(|n| feature_index(n).ok_or_else(|| Error::Validation(format!("unknown feature '{n}' in importance report"))))
        .collect::<Result<_>>()?;
    if indices.len() < 2 {
        return Err(Error::InsufficientData("ablation needs at least two features".into()));
    }
    // subsets[s] keeps the features remaining after s removals, in registry order
    let subsets: Vec<Vec<usize>> = (0..indices.len())
        .map(|s| {
            let mut keep = indices[s..].to_vec();
            keep.sort_unstable();
            keep
        })
        .collect();
    let f: Vec<f64> = subsets
        .par_iter()
        .map(|keep| evaluate_matrices(mats, keep, cfg, false).map(|r| r.mean.f_measure))
        .collect::<Result<_>>()?;
    let last_feature = order[order.len() - 1].to_string();
    let steps = (1..indices.len())
        .map(|s| AblationStep {
            step: s,
            removed_feature: order[s - 1].to_string(),
            remaining: indices.len() - s,
            f_measure: f[s],
        })
        .collect();
    Ok(AblationCurve {
        baseline_f: f[0],
        steps,
        last_feature,
    })
}
