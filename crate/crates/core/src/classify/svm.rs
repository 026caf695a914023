//! L2-regularized hinge-loss linear SVM solved by dual coordinate descent.
//! The bias is learned as the weight of a constant extra feature.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Per-column affine map to zero mean and unit variance, fitted on training
/// rows. Columns whose standard deviation is at most 1e-12 keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let d = x.first().map(Vec::len).unwrap_or(0);
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            check_row(row, d)?;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_row(row, self.dim())?;
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

fn check_row(row: &[f64], d: usize) -> Result<()> {
    if row.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature value {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Relative decrease of the dual objective below which training stops.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Scale C per class by `N / (2 N_c)`.
    pub balanced: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
            balanced: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Cost multipliers, abuse first.
    pub class_weights: [f64; 2],
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// `w . standardize(x) + b`; positive means abuse.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    let z = model.standardizer.apply(x)?;
    Ok(z.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.bias)
}

pub fn train_svm(x: &[Vec<f64>], y: &[Label], params: &SvmParams) -> Result<SvmModel> {
    train_svm_traced(x, y, params).map(|(m, _)| m)
}

/// Trains and also returns the dual objective after every epoch.
pub fn train_svm_traced(x: &[Vec<f64>], y: &[Label], params: &SvmParams) -> Result<(SvmModel, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n_abuse = y.iter().filter(|l| l.is_abuse()).count();
    let n_non = y.len() - n_abuse;
    if n_abuse < 2 || n_non < 2 {
        return Err(Error::InsufficientData(format!(
            "SVM needs at least two examples per class, got {n_abuse} abuse and {n_non} non-abuse"
        )));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Config(format!("SVM C must be positive, got {}", params.c)));
    }
    let standardizer = Standardizer::fit(x)?;
    let d = standardizer.dim();
    // rows with the constant bias column appended
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut v = standardizer.apply(r)?;
            v.push(1.0);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let sign: Vec<f64> = y.iter().map(|l| if l.is_abuse() { 1.0 } else { -1.0 }).collect();
    let n = y.len() as f64;
    let class_weights = if params.balanced {
        [n / (2.0 * n_abuse as f64), n / (2.0 * n_non as f64)]
    } else {
        [1.0, 1.0]
    };
    let upper: Vec<f64> = y
        .iter()
        .map(|l| params.c * class_weights[usize::from(!l.is_abuse())])
        .collect();
    let qdiag: Vec<f64> = z.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();

    let mut alpha = vec![0.0; z.len()];
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = Vec::new();
    let dual = |w: &[f64], alpha: &[f64]| 0.5 * w.iter().map(|v| v * v).sum::<f64>() - alpha.iter().sum::<f64>();
    let mut previous = dual(&w, &alpha);

    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = &z[i];
            let g = sign[i] * row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.0;
            let old = alpha[i];
            let new = (old - g / qdiag[i]).clamp(0.0, upper[i]);
            let delta = new - old;
            if delta != 0.0 {
                alpha[i] = new;
                let step = delta * sign[i];
                for (wj, v) in w.iter_mut().zip(row) {
                    *wj += step * v;
                }
            }
        }
        let current = dual(&w, &alpha);
        trace.push(current);
        let decrease = previous - current;
        previous = current;
        if decrease <= params.tolerance * current.abs().max(1e-12) {
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok((
        SvmModel {
            standardizer,
            weights: w,
            bias,
            c: params.c,
            class_weights,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[bool]) -> Vec<Label> {
        v.iter().map(|&a| Label::from_bool(a)).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..10 {
            x.push(vec![-1.0]);
            y.push(false);
            x.push(vec![1.0]);
            y.push(true);
        }
        let y = labels(&y);
        let m = train_svm(&x, &y, &SvmParams::default()).unwrap();
        for (row, l) in x.iter().zip(&y) {
            let s = svm_decision(&m, row).unwrap();
            assert_eq!(s > 0.0, l.is_abuse());
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..80 {
            let t = i as f64 / 10.0;
            x.push(vec![t.sin(), (t * 1.7).cos(), t % 3.0]);
            y.push((t.sin() + 0.3 * (t * 1.7).cos()) > 0.1);
        }
        let params = SvmParams { tolerance: 1e-9, max_epochs: 200, ..SvmParams::default() };
        let (_, trace) = train_svm_traced(&x, &labels(&y), &params).unwrap();
        assert!(trace.len() > 2);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn standardization_moments() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 3.0, (i * i) as f64 * 0.01]).collect();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.std[1], 1.0);
        let z: Vec<Vec<f64>> = x.iter().map(|r| s.apply(r).unwrap()).collect();
        for c in [0, 2] {
            let mean: f64 = z.iter().map(|r| r[c]).sum::<f64>() / 50.0;
            let var: f64 = z.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_vector_scores_bias() {
        let x = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![0.5, 0.0], vec![3.0, 2.5]];
        let y = labels(&[false, true, false, true]);
        let mut m = train_svm(&x, &y, &SvmParams::default()).unwrap();
        m.bias = 0.0;
        let mean = m.standardizer.mean.clone();
        assert!(svm_decision(&m, &mean).unwrap().abs() < 1e-12);
        assert!(svm_decision(&m, &[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let y = labels(&[true, false, true]);
        let x = vec![vec![1.0], vec![0.0], vec![2.0]];
        assert!(train_svm(&x, &y, &SvmParams::default()).is_err());
        let x = vec![vec![1.0], vec![f64::NAN], vec![2.0], vec![0.0]];
        let y = labels(&[true, false, true, false]);
        assert!(matches!(train_svm(&x, &y, &SvmParams::default()), Err(Error::NonFinite(_))));
    }
}
