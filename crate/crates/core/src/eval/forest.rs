//! Random forest of Gini trees, used only for its mean-decrease-impurity
//! feature importances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means the square root of the count.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
        }
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Best Gini split of `rows` on one feature, or `None` when the feature is
/// constant there.
fn best_split_on(col: &[f64], y: &[bool], rows: &[usize], pairs: &mut Vec<(f64, bool)>, parent_pos: f64) -> Option<(f64, f64)> {
    pairs.clear();
    pairs.extend(rows.iter().map(|&i| (col[i], y[i])));
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len() as f64;
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let mut left_pos = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..pairs.len() - 1 {
        if pairs[k].1 {
            left_pos += 1.0;
        }
        let (here, next) = (pairs[k].0, pairs[k + 1].0);
        if here == next {
            continue;
        }
        let nl = (k + 1) as f64;
        let nr = n - nl;
        let impurity = nl * gini(left_pos, nl) + nr * gini(parent_pos - left_pos, nr);
        if best.map_or(true, |(b, _)| impurity < b) {
            let mut threshold = here + (next - here) / 2.0;
            if threshold >= next {
                threshold = here;
            }
            best = Some((impurity, threshold));
        }
    }
    best
}

/// Grows one fully developed tree and adds its impurity decreases into
/// `importance`.
fn grow_tree(cols: &[Vec<f64>], y: &[bool], sample: Vec<usize>, max_features: usize, rng: &mut ChaCha8Rng, importance: &mut [f64]) {
    let d = cols.len();
    let mut stack = vec![sample];
    let mut features: Vec<usize> = (0..d).collect();
    let mut pairs: Vec<(f64, bool)> = Vec::new();
    while let Some(rows) = stack.pop() {
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&i| y[i]).count() as f64;
        if rows.len() < 2 || pos == 0.0 || pos == n {
            continue;
        }
        let parent = n * gini(pos, n);
        features.shuffle(rng);
        let mut best: Option<Split> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= max_features && best.is_some() {
                break;
            }
            if let Some((impurity, threshold)) = best_split_on(&cols[f], y, &rows, &mut pairs, pos) {
                let decrease = parent - impurity;
                if best.as_ref().map_or(true, |b| decrease > b.decrease) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        decrease,
                    });
                }
            }
        }
        let Some(split) = best else { continue };
        importance[split.feature] += split.decrease;
        let col = &cols[split.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= split.threshold);
        stack.push(right);
        stack.push(left);
    }
}

/// Normalized mean-decrease-impurity importances of one forest.
pub fn forest_importance(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == n {
        return Err(Error::InsufficientData("feature importance needs both classes".into()));
    }
    let d = x[0].len();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let mut total = vec![0.0; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.n_trees {
        let sample: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut tree = vec![0.0; d];
        grow_tree(&cols, y, sample, max_features, &mut rng, &mut tree);
        let sum: f64 = tree.iter().sum();
        if sum > 0.0 {
            for (t, v) in total.iter_mut().zip(&tree) {
                *t += v / sum;
            }
        }
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    /// One importance vector per run.
    pub runs: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ImportanceReport {
    pub fn from_runs(features: Vec<String>, runs: Vec<Vec<f64>>) -> Self {
        let d = features.len();
        let k = runs.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| runs.iter().map(|r| r[j]).sum::<f64>() / k).collect();
        let std = (0..d)
            .map(|j| (runs.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / k).sqrt())
            .collect();
        Self {
            features,
            runs,
            mean,
            std,
        }
    }

    /// Feature names by decreasing mean importance; ties keep registry order.
    pub fn ranking(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&a, &b| self.mean[b].total_cmp(&self.mean[a]).then(a.cmp(&b)));
        order.iter().map(|&i| self.features[i].as_str()).collect()
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.ranking().iter().position(|n| *n == name)
    }
}

/// `runs` independently seeded forests; run `r` uses seed `seed + r`.
pub fn tree_importance(
    x: &[Vec<f64>],
    y: &[bool],
    names: &[String],
    runs: usize,
    seed: u64,
    params: &ForestParams,
) -> Result<ImportanceReport> {
    if let Some(row) = x.iter().find(|r| r.len() != names.len()) {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            actual: row.len(),
        });
    }
    let results: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| forest_importance(x, y, params, seed.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;
    Ok(ImportanceReport::from_runs(names.to_vec(), results))
}
