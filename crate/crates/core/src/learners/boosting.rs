use serde::{Deserialize, Serialize};

use super::tree::{grow, Presorted, Tree};
use super::{sigmoid, softplus, Diagnostics};
use crate::error::Result;
use crate::rng::{sample_indices, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// Fraction of rows drawn without replacement for each tree.
    pub subsample: f64,
    pub min_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self { n_trees: 300, max_depth: 3, shrinkage: 0.1, subsample: 0.5, min_leaf: 5 }
    }
}

/// Stochastic gradient boosting for the Bernoulli deviance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostingModel {
    pub initial: f64,
    pub(crate) trees: Vec<Tree>,
    /// Summed squared-error improvement of every split, per gene.
    pub importance: Vec<f64>,
}

impl BoostingModel {
    pub fn decision(&self, cols: &[&[f64]], i: usize) -> f64 {
        self.initial + self.trees.iter().map(|t| t.value_at(cols, i)).sum::<f64>()
    }

    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        (0..n).map(|i| sigmoid(self.decision(cols, i))).collect()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn mean_deviance(f: &[f64], y: &[f64]) -> f64 {
    2.0 * f.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum::<f64>() / y.len() as f64
}

const LEAF_STEP_CAP: f64 = 8.0;

/// Newton iterations on one leaf's deviance, starting from the current fit.
fn leaf_step(rows: &[usize], f: &[f64], y: &[f64]) -> f64 {
    let mut gamma = 0.0f64;
    for _ in 0..8 {
        let (mut g, mut h) = (0.0, 0.0);
        for &i in rows {
            let p = sigmoid(f[i] + gamma);
            g += y[i] - p;
            h += p * (1.0 - p);
        }
        if h < 1e-12 {
            break;
        }
        let step = g / h;
        gamma = (gamma + step).clamp(-LEAF_STEP_CAP, LEAF_STEP_CAP);
        if step.abs() < 1e-10 || gamma.abs() >= LEAF_STEP_CAP {
            break;
        }
    }
    gamma
}

pub(crate) fn fit(
    params: &BoostingParams,
    cols: &[&[f64]],
    y: &[f64],
    seed: u64,
) -> Result<(BoostingModel, Diagnostics)> {
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let initial = (ybar / (1.0 - ybar)).ln();
    let sorted = Presorted::new(cols);
    let mut f = vec![initial; n];
    let mut dev = mean_deviance(&f, y);
    let mut trace = vec![dev];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut importance = vec![0.0; cols.len()];
    let sample_size = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut skipped = 0usize;

    for t in 0..params.n_trees {
        let mut in_sample = vec![false; n];
        if sample_size == n {
            in_sample.iter_mut().for_each(|v| *v = true);
        } else {
            let mut rng = stream_rng(seed, t as u64);
            for i in sample_indices(&mut rng, n, sample_size) {
                in_sample[i] = true;
            }
        }
        let residual: Vec<f64> = (0..n).map(|i| y[i] - sigmoid(f[i])).collect();
        let grown = grow(cols, &sorted, &residual, &in_sample, params.max_depth, params.min_leaf);
        let mut tree = grown.tree;

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        for (i, &leaf) in grown.leaf_of_row.iter().enumerate() {
            if leaf != usize::MAX {
                members[leaf].push(i);
            }
        }
        for (node, rows) in members.iter().enumerate() {
            if !rows.is_empty() {
                tree.set_leaf(node, params.shrinkage * leaf_step(rows, &f, y));
            }
        }

        // Accept the tree only if it lowers the deviance on all rows, halving
        // its contribution a few times before giving up on it.
        let contrib: Vec<f64> = (0..n).map(|i| tree.value_at(cols, i)).collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let cand: Vec<f64> = f.iter().zip(&contrib).map(|(a, c)| a + scale * c).collect();
            let d = mean_deviance(&cand, y);
            if d <= dev {
                accepted = Some((cand, d));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, d)) = accepted else {
            skipped += 1;
            continue;
        };
        if scale < 1.0 {
            for node in 0..tree.nodes.len() {
                if let super::tree::Node::Leaf { value } = tree.nodes[node] {
                    tree.set_leaf(node, value * scale);
                }
            }
        }
        for (feat, gain) in grown.splits {
            importance[feat] += gain;
        }
        f = cand;
        dev = d;
        trace.push(dev);
        trees.push(tree);
    }

    let mut diagnostics = Diagnostics { converged: true, loss_trace: trace, ..Diagnostics::default() };
    if skipped > 0 {
        diagnostics.notes.push(format!("{skipped} trees did not lower the training deviance and were dropped"));
    }
    Ok((BoostingModel { initial, trees, importance }, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::{self, TreeParams};

    fn toy() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64).collect();
        let b: Vec<f64> = (0..40).map(|i| ((i * 11) % 17) as f64).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(x, z)| f64::from(x + z > 27.0)).collect();
        (a, b, y)
    }

    #[test]
    fn deviance_trace_nonincreasing() {
        let (a, b, y) = toy();
        let (m, d) = fit(&BoostingParams { n_trees: 100, ..Default::default() }, &[&a, &b], &y, 3).unwrap();
        assert!(d.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.importance.iter().all(|&v| v >= 0.0));
        let p = m.predict(&[&a, &b], 40);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn single_full_tree_matches_cart() {
        let (a, b, y) = toy();
        let depth = 2;
        let params = BoostingParams { n_trees: 1, max_depth: depth, shrinkage: 1.0, subsample: 1.0, min_leaf: 3 };
        let (boost, _) = fit(&params, &[&a, &b], &y, 9).unwrap();
        let (cart, _) = tree::fit(&TreeParams { max_depth: depth, min_leaf: 3 }, &[&a, &b], &y).unwrap();
        let pb = boost.predict(&[&a, &b], 40);
        let pc = cart.predict(&[&a, &b], 40);
        for (x, z) in pb.iter().zip(&pc) {
            assert!((x - z).abs() < 1e-3, "{x} vs {z}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (a, b, y) = toy();
        let p = BoostingParams { n_trees: 30, ..Default::default() };
        let (m1, _) = fit(&p, &[&a, &b], &y, 5).unwrap();
        let (m2, _) = fit(&p, &[&a, &b], &y, 5).unwrap();
        assert_eq!(m1, m2);
    }
}
