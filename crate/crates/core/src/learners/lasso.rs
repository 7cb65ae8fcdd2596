use serde::{Deserialize, Serialize};

use super::Diagnostics;
use crate::error::{Error, Result};
use crate::evalkit::stratified_folds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoParams {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of the smallest all-zero lambda.
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    /// Explicit grid; overrides `n_lambda` and `lambda_min_ratio`.
    pub lambdas: Option<Vec<f64>>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self { n_lambda: 50, lambda_min_ratio: 1e-3, cv_folds: 5, lambdas: None, tol: 1e-7, max_sweeps: 10_000 }
    }
}

/// Squared-loss lasso on the 0/1 label, inputs standardized to unit
/// population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub intercept: f64,
    /// Coefficients on standardized inputs.
    pub coef: Vec<f64>,
    pub lambda: f64,
}

impl LassoModel {
    fn raw(&self, cols: &[&[f64]], i: usize) -> f64 {
        self.intercept
            + cols
                .iter()
                .enumerate()
                .filter(|(j, _)| self.sds[*j] > 0.0)
                .map(|(j, c)| self.coef[j] * (c[i] - self.means[j]) / self.sds[j])
                .sum::<f64>()
    }

    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        (0..n).map(|i| self.raw(cols, i).clamp(0.0, 1.0)).collect()
    }

    pub fn importance(&self) -> Vec<f64> {
        self.coef.iter().map(|b| b.abs()).collect()
    }
}

struct Standardized {
    z: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn standardize(cols: &[&[f64]], y: &[f64]) -> Standardized {
    let n = y.len() as f64;
    let mut means = Vec::with_capacity(cols.len());
    let mut sds = Vec::with_capacity(cols.len());
    let mut z = Vec::with_capacity(cols.len());
    for c in cols {
        let m = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = if var > 1e-24 * m.abs().max(1.0).powi(2) { var.sqrt() } else { 0.0 };
        z.push(if sd > 0.0 { c.iter().map(|v| (v - m) / sd).collect() } else { vec![0.0; c.len()] });
        means.push(m);
        sds.push(sd);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    let yc = y.iter().map(|v| v - y_mean).collect();
    Standardized { z, means, sds, y_mean, yc }
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for (1/2n)|y - Zb|^2 + lambda |b|_1, warm-started
/// from `beta`. Returns the number of sweeps used.
fn descend(z: &[Vec<f64>], yc: &[f64], lambda: f64, beta: &mut [f64], tol: f64, max_sweeps: usize) -> usize {
    let n = yc.len() as f64;
    let mut resid: Vec<f64> = yc.to_vec();
    for (j, col) in z.iter().enumerate() {
        if beta[j] != 0.0 {
            for (r, x) in resid.iter_mut().zip(col) {
                *r -= beta[j] * x;
            }
        }
    }
    let norms: Vec<f64> = z.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    for sweep in 1..=max_sweeps {
        let mut max_change = 0.0f64;
        for (j, col) in z.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n + norms[j] * beta[j];
            let updated = soft_threshold(rho, lambda) / norms[j];
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return sweep;
        }
    }
    max_sweeps
}

fn lambda_max(z: &[Vec<f64>], yc: &[f64]) -> f64 {
    let n = yc.len() as f64;
    z.iter().map(|c| (c.iter().zip(yc).map(|(x, r)| x * r).sum::<f64>() / n).abs()).fold(0.0, f64::max)
}

fn grid(params: &LassoParams, lmax: f64) -> Vec<f64> {
    if let Some(l) = &params.lambdas {
        let mut l = l.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        return l;
    }
    let top = lmax.max(1e-12);
    let k = params.n_lambda;
    if k == 1 {
        return vec![top];
    }
    let lo = top * params.lambda_min_ratio;
    (0..k).map(|i| (top.ln() + (lo.ln() - top.ln()) * i as f64 / (k - 1) as f64).exp()).collect()
}

/// Lasso fit at one lambda. Returns (intercept, coefficients on the original
/// gene scale).
pub fn lasso_fixed_lambda(cols: &[&[f64]], y: &[f64], lambda: f64, tol: f64, max_sweeps: usize) -> (f64, Vec<f64>) {
    let s = standardize(cols, y);
    let mut beta = vec![0.0; cols.len()];
    descend(&s.z, &s.yc, lambda, &mut beta, tol, max_sweeps);
    let raw: Vec<f64> = beta.iter().zip(&s.sds).map(|(b, sd)| if *sd > 0.0 { b / sd } else { 0.0 }).collect();
    let intercept = s.y_mean - raw.iter().zip(&s.means).map(|(b, m)| b * m).sum::<f64>();
    (intercept, raw)
}

fn path_predictions(
    params: &LassoParams,
    train_cols: &[&[f64]],
    train_y: &[f64],
    test_cols: &[&[f64]],
    lambdas: &[f64],
) -> Vec<Vec<f64>> {
    let s = standardize(train_cols, train_y);
    let mut beta = vec![0.0; train_cols.len()];
    let n_test = test_cols.first().map_or(0, |c| c.len());
    lambdas
        .iter()
        .map(|&lam| {
            descend(&s.z, &s.yc, lam, &mut beta, params.tol, params.max_sweeps);
            (0..n_test)
                .map(|i| {
                    s.y_mean
                        + (0..beta.len())
                            .filter(|&j| s.sds[j] > 0.0)
                            .map(|j| beta[j] * (test_cols[j][i] - s.means[j]) / s.sds[j])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Picks lambda by stratified k-fold mean squared error, then refits on all rows.
pub(crate) fn fit(
    params: &LassoParams,
    cols: &[&[f64]],
    labels: &[u8],
    seed: u64,
) -> Result<(LassoModel, Diagnostics)> {
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let n = y.len();
    let full = standardize(cols, &y);
    let lambdas = grid(params, lambda_max(&full.z, &full.yc));
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Parameter("lasso lambdas must be finite and nonnegative".into()));
    }

    let folds = params.cv_folds.min(n);
    let assignment = stratified_folds(labels, folds, seed)?;
    let mut mse = vec![0.0; lambdas.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        if test.is_empty() {
            continue;
        }
        let pick =
            |rows: &[usize]| -> Vec<Vec<f64>> { cols.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect() };
        let (tr, te) = (pick(&train), pick(&test));
        let tr_refs: Vec<&[f64]> = tr.iter().map(Vec::as_slice).collect();
        let te_refs: Vec<&[f64]> = te.iter().map(Vec::as_slice).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (k, pred) in path_predictions(params, &tr_refs, &ty, &te_refs, &lambdas).into_iter().enumerate() {
            mse[k] += pred.iter().zip(&test).map(|(p, &i)| (p - y[i]).powi(2)).sum::<f64>();
        }
    }
    let mut best = 0;
    for k in 1..lambdas.len() {
        if mse[k] < mse[best] {
            best = k;
        }
    }
    let lambda = lambdas[best];

    let mut beta = vec![0.0; cols.len()];
    for &lam in &lambdas[..=best] {
        descend(&full.z, &full.yc, lam, &mut beta, params.tol, params.max_sweeps);
    }
    let trace: Vec<f64> = mse.iter().map(|v| v / n as f64).collect();
    let model = LassoModel { means: full.means, sds: full.sds, intercept: full.y_mean, coef: beta.clone(), lambda };
    let diagnostics = Diagnostics {
        converged: true,
        loss_trace: trace,
        standardized_coefficients: Some(beta),
        notes: vec![format!("cross-validated lambda {lambda:.6e}")],
        ..Diagnostics::default()
    };
    Ok((model, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn system() -> (Vec<Vec<f64>>, Vec<f64>) {
        let a: Vec<f64> = (0..10).map(|i| f64::from(i) * 0.7 + 1.0).collect();
        let b: Vec<f64> = (0..10).map(|i| f64::from((i * 7) % 10) - 2.0).collect();
        let c: Vec<f64> = (0..10).map(|i| f64::from(i * i) / 10.0).collect();
        let y: Vec<f64> = (0..10).map(|i| f64::from((i * 3) % 5) * 0.4 + f64::from(i) * 0.1).collect();
        (vec![a, b, c], y)
    }

    #[test]
    fn zero_lambda_matches_normal_equations() {
        let (cols, y) = system();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let (b0, b) = lasso_fixed_lambda(&refs, &y, 0.0, 1e-14, 1_000_000);
        let x = DMatrix::from_fn(10, 4, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
        let ols = (x.transpose() * &x).lu().solve(&(x.transpose() * DVector::from_vec(y.clone()))).unwrap();
        assert!((b0 - ols[0]).abs() < 1e-6);
        for j in 0..3 {
            assert!((b[j] - ols[j + 1]).abs() < 1e-6, "{} vs {}", b[j], ols[j + 1]);
        }
    }

    #[test]
    fn above_critical_lambda_all_zero() {
        let (cols, y) = system();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let s = standardize(&refs, &y);
        let lmax = lambda_max(&s.z, &s.yc);
        let (_, b) = lasso_fixed_lambda(&refs, &y, lmax, 1e-12, 10_000);
        assert!(b.iter().all(|&v| v == 0.0));
        let (_, b) = lasso_fixed_lambda(&refs, &y, lmax * 0.9, 1e-12, 10_000);
        assert!(b.iter().any(|&v| v != 0.0));
    }
}
