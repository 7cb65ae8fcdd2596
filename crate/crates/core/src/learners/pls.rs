use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Diagnostics;
use crate::data::{mean_sd, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlsParams {
    pub n_components: usize,
    /// Genes with |standardized coefficient| below this are not selected.
    pub std_coef_cutoff: f64,
}

impl Default for PlsParams {
    fn default() -> Self {
        Self { n_components: 3, std_coef_cutoff: 0.1 }
    }
}

/// Single-response PLS on standardized genes, collapsed to a linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    pub scaler: Standardizer,
    pub y_mean: f64,
    /// Coefficients on standardized inputs.
    pub coef: Vec<f64>,
    /// `coef` divided by the label standard deviation.
    pub std_coef: Vec<f64>,
    pub n_components: usize,
}

impl PlsModel {
    pub fn predict_raw(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                self.y_mean
                    + cols.iter().enumerate().map(|(j, c)| self.coef[j] * self.scaler.apply(j, c[i])).sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        self.predict_raw(cols, n).into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }

    pub fn importance(&self) -> Vec<f64> {
        self.std_coef.iter().map(|b| b.abs()).collect()
    }

    /// Latent components plus the intercept.
    pub fn parameter_count(&self) -> usize {
        self.n_components + 1
    }
}

/// NIPALS for one response: weights from X'y, deflation of X and y by each score.
pub(crate) fn fit(params: &PlsParams, cols: &[&[f64]], y: &[f64]) -> Result<(PlsModel, Diagnostics)> {
    let n = y.len();
    let k = cols.len();
    let scaler = Standardizer::fit(cols);
    let mut x = DMatrix::from_fn(n, k, |i, j| scaler.apply(j, cols[j][i]));
    let (y_mean, y_sd) = mean_sd(y);
    if y_sd.is_nan() || y_sd <= 0.0 {
        return Err(Error::Class("pls needs both classes".into()));
    }
    let mut resid = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let max_comp = params.n_components.min(k).min(n.saturating_sub(1)).max(1);
    let mut ws: Vec<DVector<f64>> = Vec::new();
    let mut ps: Vec<DVector<f64>> = Vec::new();
    let mut qs: Vec<f64> = Vec::new();
    let mut trace = vec![resid.norm_squared()];
    for _ in 0..max_comp {
        let mut w = x.transpose() * &resid;
        let wn = w.norm();
        if wn < 1e-12 {
            break;
        }
        w /= wn;
        let t = &x * &w;
        let tt = t.norm_squared();
        if tt < 1e-12 {
            break;
        }
        let p = x.transpose() * &t / tt;
        let q = resid.dot(&t) / tt;
        x -= &t * p.transpose();
        resid -= &t * q;
        trace.push(resid.norm_squared());
        ws.push(w);
        ps.push(p);
        qs.push(q);
    }

    let a = ws.len();
    let mut coef = vec![0.0; k];
    if a > 0 {
        let w = DMatrix::from_columns(&ws);
        let p = DMatrix::from_columns(&ps);
        let q = DVector::from_vec(qs);
        let ptw = p.transpose() * &w;
        let inv = ptw.try_inverse().ok_or_else(|| Error::Input("pls loading matrix is singular".into()))?;
        let beta = w * inv * q;
        coef.copy_from_slice(beta.as_slice());
    }
    let std_coef = coef.iter().map(|b| b / y_sd).collect::<Vec<_>>();
    let model = PlsModel { scaler, y_mean, coef, std_coef: std_coef.clone(), n_components: a };
    let diagnostics = Diagnostics {
        converged: true,
        loss_trace: trace,
        standardized_coefficients: Some(std_coef),
        ..Diagnostics::default()
    };
    Ok((model, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_components_equal_least_squares() {
        // with as many components as genes, PLS reproduces the OLS fit
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 9.0];
        let y = [0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let (m, _) = fit(&PlsParams { n_components: 2, std_coef_cutoff: 0.1 }, &[&a, &b], &y).unwrap();
        let fitted = m.predict_raw(&[&a, &b], 8);

        let x = DMatrix::from_fn(8, 3, |i, j| match j {
            0 => 1.0,
            1 => a[i],
            _ => b[i],
        });
        let yv = DVector::from_column_slice(&y);
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &yv;
        let ols = &x * beta;
        for (f, o) in fitted.iter().zip(ols.iter()) {
            assert!((f - o).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_trace_shrinks() {
        let a = [0.5, 1.5, 2.0, 3.5, 4.0, 5.5];
        let b = [1.0, 0.0, 2.0, 1.0, 3.0, 2.5];
        let c = [9.0, 7.0, 8.0, 3.0, 2.0, 1.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let (m, d) = fit(&PlsParams::default(), &[&a, &b, &c], &y).unwrap();
        assert!(d.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(m.predict(&[&a, &b, &c], 6).iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
