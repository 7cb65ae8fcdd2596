use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{sigmoid, softplus, Diagnostics};
use crate::data::{LabeledDataset, Standardizer};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub max_iter: usize,
    /// Largest believable |coefficient| on standardized inputs.
    pub coef_cap: f64,
    /// Standard errors above this multiple of max(|estimate|, 1) signal separation.
    pub se_ratio: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { max_iter: 25, coef_cap: 15.0, se_ratio: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepwiseParams {
    /// Genes whose Wald p-value exceeds this are eligible for removal.
    pub alpha: f64,
    #[serde(flatten)]
    pub logistic: LogisticParams,
}

impl Default for StepwiseParams {
    fn default() -> Self {
        Self { alpha: 0.05, logistic: LogisticParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub scaler: Standardizer,
    pub intercept: f64,
    /// Coefficients on standardized inputs; constant columns hold 0.
    pub coef: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl LogisticModel {
    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let eta = self.intercept
                    + cols.iter().enumerate().map(|(j, c)| self.coef[j] * self.scaler.apply(j, c[i])).sum::<f64>();
                sigmoid(eta)
            })
            .collect()
    }

    pub fn importance(&self) -> Vec<f64> {
        self.coef.iter().map(|b| b.abs()).collect()
    }

    /// Two-sided Wald p-value per gene; constant genes get 1.
    pub fn wald_p_values(&self) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.std_errors)
            .map(|(&b, &se)| {
                if !(se.is_finite() && se > 0.0) {
                    return 1.0;
                }
                let z = (b / se).abs();
                erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        1 + (0..self.coef.len()).filter(|&j| !self.scaler.is_constant(j)).count()
    }
}

fn deviance(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    2.0 * eta.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum::<f64>()
}

/// Fisher information X'WX at `beta`.
fn information(x: &DMatrix<f64>, beta: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let eta = x * beta;
    let mu = eta.map(sigmoid);
    let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    (x.transpose() * xw, mu)
}

fn solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-300);
    if let Some(ch) = h.clone().cholesky() {
        // a rank-deficient information matrix can still factor with rounding-level pivots
        let weakest = ch.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if weakest > 1e-10 * scale {
            return Some(ch.solve(g));
        }
    }
    // minimum-norm Newton step: nothing moves along directions the data cannot see
    h.clone().svd(true, true).solve(g, 1e-10 * scale).ok()
}

/// Iteratively reweighted least squares with step halving, so the deviance
/// never increases between iterations.
pub(crate) fn fit(params: &LogisticParams, cols: &[&[f64]], y: &[f64]) -> Result<(LogisticModel, Diagnostics)> {
    let n = y.len();
    let scaler = Standardizer::fit(cols);
    let active: Vec<usize> = (0..cols.len()).filter(|&j| !scaler.is_constant(j)).collect();
    let k = active.len() + 1;
    let x =
        DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { scaler.apply(active[c - 1], cols[active[c - 1]][i]) });

    let mut beta = DVector::zeros(k);
    let mut dev = deviance(&x, y, &beta);
    let mut trace = vec![dev];
    let mut converged = false;
    let yv = DVector::from_column_slice(y);

    for _ in 0..params.max_iter {
        let (h, mu) = information(&x, &beta);
        let grad = x.transpose() * (&yv - mu);
        let Some(step) = solve(&h, &grad) else { break };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let d = deviance(&x, y, &cand);
            if d <= dev {
                accepted = Some((cand, d));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, d)) = accepted else {
            converged = true;
            break;
        };
        let change = dev - d;
        beta = cand;
        dev = d;
        trace.push(dev);
        if change < 1e-8 {
            converged = true;
            break;
        }
    }

    let (h, _) = information(&x, &beta);
    let se_active: Vec<f64> = match h.clone().try_inverse() {
        Some(inv) => (1..k).map(|c| inv[(c, c)].max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; k - 1],
    };
    let mut coef = vec![0.0; cols.len()];
    let mut std_errors = vec![f64::INFINITY; cols.len()];
    for (c, &j) in active.iter().enumerate() {
        coef[j] = beta[c + 1];
        std_errors[j] = se_active[c];
    }
    let separated = active.iter().any(|&j| {
        coef[j].abs() > params.coef_cap
            || std_errors[j].is_nan()
            || std_errors[j] > params.se_ratio * coef[j].abs().max(1.0)
    });

    let model = LogisticModel { scaler, intercept: beta[0], coef: coef.clone(), std_errors: std_errors.clone() };
    let diagnostics = Diagnostics {
        converged,
        separated,
        loss_trace: trace,
        standard_errors: Some(std_errors),
        standardized_coefficients: Some(coef),
        ..Diagnostics::default()
    };
    Ok((model, diagnostics))
}

/// Backward elimination by Wald p-value: refit, drop the least significant gene
/// while its p-value exceeds `alpha`. Stops without dropping once the current
/// fit is flagged as separated, because its Wald tests are meaningless.
pub fn stepwise_select(params: &StepwiseParams, data: &LabeledDataset, pool: &[String]) -> Result<Vec<String>> {
    let y = data.labels_f64();
    let mut current = pool.to_vec();
    while !current.is_empty() {
        let cols: Vec<&[f64]> = current.iter().map(|g| data.matrix.column_by_id(g)).collect::<Result<_>>()?;
        let (model, diag) = fit(&params.logistic, &cols, &y)?;
        if diag.separated {
            break;
        }
        let pvals = model.wald_p_values();
        let (worst, &p) =
            pvals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).expect("nonempty");
        if p <= params.alpha {
            break;
        }
        current.remove(worst);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpressionMatrix;

    #[test]
    fn separated_toy_flags() {
        let x = [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let (m, d) = fit(&LogisticParams::default(), &[&x], &y).unwrap();
        assert!(d.separated);
        assert!(m.std_errors[0] > 50.0 * m.coef[0].abs().max(1.0) || m.coef[0].abs() > 15.0);
        assert!(d.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn overlapping_classes_converge() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let y = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let (m, d) = fit(&LogisticParams::default(), &[&x], &y).unwrap();
        assert!(d.converged);
        assert!(!d.separated);
        assert!(m.coef[0] > 0.0);
        // score equations hold at the MLE
        let p = m.predict(&[&x], 10);
        let resid: f64 = p.iter().zip(&y).map(|(a, b)| b - a).sum();
        assert!(resid.abs() < 1e-6);
    }

    #[test]
    fn null_model_is_half() {
        let m = LogisticModel {
            scaler: Standardizer { means: vec![0.0], sds: vec![1.0] },
            intercept: 0.0,
            coef: vec![0.0],
            std_errors: vec![1.0],
        };
        let x = [5.0, -2.0, 40.0];
        assert!(m.predict(&[&x], 3).iter().all(|&p| p == 0.5));
    }

    fn dataset(cols: Vec<(&str, Vec<f64>)>, labels: Vec<u8>) -> LabeledDataset {
        let (ids, cols): (Vec<String>, Vec<Vec<f64>>) = cols.into_iter().map(|(a, b)| (a.to_string(), b)).unzip();
        LabeledDataset::new(ExpressionMatrix::from_columns(ids, cols).unwrap(), labels, None).unwrap()
    }

    #[test]
    fn stepwise_keeps_perfect_predictor() {
        let labels = vec![0, 1, 0, 1, 1, 0, 1, 0];
        let g: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let d = dataset(vec![("L", g)], labels);
        let kept = stepwise_select(&StepwiseParams::default(), &d, &["L".into()]).unwrap();
        assert_eq!(kept, vec!["L"]);
    }

    #[test]
    fn stepwise_alpha_one_keeps_all() {
        let labels = vec![0, 0, 1, 0, 1, 1, 0, 1, 1, 0];
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let b = vec![3.0, 6.0, 4.0, 1.0, 5.0, 9.0, 2.0, 2.0, 5.0, 3.0];
        let d = dataset(vec![("A", a), ("B", b)], labels);
        let params = StepwiseParams { alpha: 1.0, ..StepwiseParams::default() };
        assert_eq!(stepwise_select(&params, &d, &["A".into(), "B".into()]).unwrap(), vec!["A", "B"]);
        let strict = StepwiseParams { alpha: 1e-9, ..StepwiseParams::default() };
        let kept = stepwise_select(&strict, &d, &["A".into(), "B".into()]).unwrap();
        assert!(kept.is_empty(), "{kept:?}");
    }
}
