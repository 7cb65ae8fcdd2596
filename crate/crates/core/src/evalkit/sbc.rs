use crate::data::LabeledDataset;
use crate::error::Result;
use crate::learners::FittedModel;

/// Schwarz Bayesian criterion -2 lnL + k ln n.
pub fn sbc_value(log_likelihood: f64, k: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + k as f64 * (n as f64).ln()
}

/// SBC of a fitted model on `data`; tree, boosting, lasso and svm fits have no
/// likelihood and are rejected.
pub fn sbc(model: &FittedModel, data: &LabeledDataset) -> Result<f64> {
    let (ll, k) = model.log_likelihood(data)?;
    Ok(sbc_value(ll, k, data.n()))
}
