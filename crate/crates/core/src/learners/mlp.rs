use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, Diagnostics};
use crate::data::Standardizer;
use crate::error::Result;
use crate::rng::{stream_rng, unit_f64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: 1, weight_decay: 1e-3, epochs: 2000, learning_rate: 0.5 }
    }
}

/// One tanh hidden layer feeding a logistic output unit.
///
/// Weights live in one flat vector: for each hidden unit its input weights
/// then its bias, followed by the output weights and the output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub scaler: Standardizer,
    pub hidden: usize,
    pub weights: Vec<f64>,
}

fn n_weights(inputs: usize, hidden: usize) -> usize {
    hidden * (inputs + 1) + hidden + 1
}

fn forward(w: &[f64], inputs: usize, hidden: usize, x: impl Fn(usize) -> f64, z: &mut [f64]) -> f64 {
    let out = hidden * (inputs + 1);
    let mut o = w[out + hidden];
    for h in 0..hidden {
        let base = h * (inputs + 1);
        let mut a = w[base + inputs];
        for j in 0..inputs {
            a += w[base + j] * x(j);
        }
        z[h] = a.tanh();
        o += w[out + h] * z[h];
    }
    o
}

/// Mean cross-entropy plus `decay / 2` times the squared non-bias weights, and
/// its gradient with respect to the flat weight vector.
pub fn mlp_loss_and_grad(weights: &[f64], cols: &[&[f64]], y: &[f64], hidden: usize, decay: f64) -> (f64, Vec<f64>) {
    let inputs = cols.len();
    let n = y.len() as f64;
    let out = hidden * (inputs + 1);
    let mut grad = vec![0.0; weights.len()];
    let mut z = vec![0.0; hidden];
    let mut loss = 0.0;
    for i in 0..y.len() {
        let o = forward(weights, inputs, hidden, |j| cols[j][i], &mut z);
        loss += softplus(o) - y[i] * o;
        let delta = (sigmoid(o) - y[i]) / n;
        grad[out + hidden] += delta;
        for h in 0..hidden {
            grad[out + h] += delta * z[h];
            let back = delta * weights[out + h] * (1.0 - z[h] * z[h]);
            let base = h * (inputs + 1);
            for j in 0..inputs {
                grad[base + j] += back * cols[j][i];
            }
            grad[base + inputs] += back;
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for h in 0..hidden {
        let base = h * (inputs + 1);
        for j in 0..inputs {
            penalty += weights[base + j] * weights[base + j];
            grad[base + j] += decay * weights[base + j];
        }
        penalty += weights[out + h] * weights[out + h];
        grad[out + h] += decay * weights[out + h];
    }
    (loss + 0.5 * decay * penalty, grad)
}

impl MlpModel {
    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        let inputs = cols.len();
        let mut z = vec![0.0; self.hidden];
        (0..n)
            .map(|i| sigmoid(forward(&self.weights, inputs, self.hidden, |j| self.scaler.apply(j, cols[j][i]), &mut z)))
            .collect()
    }

    /// Sum over hidden units of |input weight| times |output weight|.
    pub fn importance(&self) -> Vec<f64> {
        let inputs = self.scaler.means.len();
        let out = self.hidden * (inputs + 1);
        (0..inputs)
            .map(|j| {
                (0..self.hidden).map(|h| self.weights[h * (inputs + 1) + j].abs() * self.weights[out + h].abs()).sum()
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }
}

/// Full-batch gradient descent; a step that raises the loss is undone and the
/// learning rate halved.
pub(crate) fn fit(params: &MlpParams, cols: &[&[f64]], y: &[f64], seed: u64) -> Result<(MlpModel, Diagnostics)> {
    let scaler = Standardizer::fit(cols);
    let z: Vec<Vec<f64>> = cols.iter().enumerate().map(|(j, c)| scaler.transform(j, c)).collect();
    let zr: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
    let mut rng = stream_rng(seed, 0);
    let mut w: Vec<f64> = (0..n_weights(cols.len(), params.hidden)).map(|_| unit_f64(&mut rng) - 0.5).collect();

    let mut lr = params.learning_rate;
    let (mut loss, mut grad) = mlp_loss_and_grad(&w, &zr, y, params.hidden, params.weight_decay);
    let mut trace = Vec::with_capacity(params.epochs + 1);
    trace.push(loss);
    let mut converged = false;
    for _ in 0..params.epochs {
        let cand: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - lr * g).collect();
        let (l2, g2) = mlp_loss_and_grad(&cand, &zr, y, params.hidden, params.weight_decay);
        if l2 > loss {
            lr *= 0.5;
            if lr < 1e-10 {
                break;
            }
            continue;
        }
        w = cand;
        loss = l2;
        grad = g2;
        trace.push(loss);
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-6 {
            converged = true;
            break;
        }
    }
    if !converged {
        converged = grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-3;
    }
    let model = MlpModel { scaler, hidden: params.hidden, weights: w };
    Ok((model, Diagnostics { converged, loss_trace: trace, ..Diagnostics::default() }))
}
