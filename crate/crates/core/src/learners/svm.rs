//! C-SVM trained by SMO with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::{sigmoid, Diagnostics};
use crate::data::Standardizer;
use crate::error::Result;
use crate::screen::ScoreKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    pub degree: u32,
    /// Defaults to 1 / number of genes.
    pub gamma: Option<f64>,
    pub coef0: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { kernel: KernelKind::Linear, c: 1.0, degree: 3, gamma: None, coef0: 0.0, tol: 1e-3, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl Kernel {
    pub fn from_params(p: &SvmParams, n_genes: usize) -> Self {
        Self { kind: p.kernel, degree: p.degree, gamma: p.gamma.unwrap_or(1.0 / n_genes.max(1) as f64), coef0: p.coef0 }
    }

    /// Kernel value from the dot product and squared distance of two points.
    fn eval_parts(&self, dot: f64, dist2: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Polynomial => (self.gamma * dot + self.coef0).powi(self.degree as i32),
            KernelKind::Rbf => (-self.gamma * dist2).exp(),
            KernelKind::Sigmoid => (self.gamma * dot + self.coef0).tanh(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let (dot, dist2) = parts(a, b, None);
        self.eval_parts(dot, dist2)
    }
}

fn parts(a: &[f64], b: &[f64], skip: Option<usize>) -> (f64, f64) {
    let mut dot = 0.0;
    let mut dist2 = 0.0;
    for (j, (x, z)) in a.iter().zip(b).enumerate() {
        if Some(j) == skip {
            continue;
        }
        dot += x * z;
        dist2 += (x - z) * (x - z);
    }
    (dot, dist2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub scaler: Standardizer,
    pub kernel: Kernel,
    /// Standardized support vectors (rows).
    pub support: Vec<Vec<f64>>,
    /// alpha_i * y_i for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
}

impl SvmModel {
    fn scale_row(&self, cols: &[&[f64]], i: usize) -> Vec<f64> {
        cols.iter().enumerate().map(|(j, c)| self.scaler.apply(j, c[i])).collect()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.dual_coef).map(|(sv, a)| a * self.kernel.eval(sv, x)).sum::<f64>() - self.rho
    }

    /// Logistic squash of the decision value.
    pub fn predict(&self, cols: &[&[f64]], n: usize) -> Vec<f64> {
        (0..n).map(|i| sigmoid(self.decision(&self.scale_row(cols, i)))).collect()
    }

    /// |w_j| for the linear kernel, otherwise the change in |w|^2 when gene j
    /// is removed from the kernel with the multipliers held fixed.
    pub fn importance(&self) -> (Vec<f64>, ScoreKind) {
        let k = self.scaler.means.len();
        if self.kernel.kind == KernelKind::Linear {
            let mut w = vec![0.0; k];
            for (sv, a) in self.support.iter().zip(&self.dual_coef) {
                for j in 0..k {
                    w[j] += a * sv[j];
                }
            }
            return (w.into_iter().map(f64::abs).collect(), ScoreKind::AbsWeight);
        }
        let w2 = |skip: Option<usize>| -> f64 {
            let mut s = 0.0;
            for (a, (sa, ca)) in self.support.iter().zip(&self.dual_coef).enumerate() {
                for (sb, cb) in self.support.iter().zip(&self.dual_coef).skip(a) {
                    let (dot, d2) = parts(sa, sb, skip);
                    let term = ca * cb * self.kernel.eval_parts(dot, d2);
                    s += if std::ptr::eq(sa, sb) { term } else { 2.0 * term };
                }
            }
            s
        };
        let full = w2(None);
        let scores = (0..k).map(|j| 0.5 * (full - w2(Some(j))).abs()).collect();
        (scores, ScoreKind::Importance)
    }
}

/// Dual solver state for min 0.5 a'Qa - e'a subject to 0 <= a <= C, y'a = 0.
struct Smo<'a> {
    q: &'a [f64],
    n: usize,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

const TAU: f64 = 1e-12;

impl Smo<'_> {
    fn kij(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] > 0.0) || (self.y[t] < 0.0 && self.alpha[t] < self.c)
    }

    /// Working pair and the current maximal violation m(a) - M(a).
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let mut i = None;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..self.n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v > gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let Some(i) = i else { return (None, 0.0) };
        let mut gmin = f64::INFINITY;
        let mut j = None;
        let mut best = f64::INFINITY;
        for t in 0..self.n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = self.kij(i, i) + self.kij(t, t) - 2.0 * self.kij(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj < best {
                    best = obj;
                    j = Some(t);
                }
            }
        }
        let gap = if gmin.is_finite() { gmax - gmin } else { 0.0 };
        (j.map(|j| (i, j)), gap)
    }

    fn update(&mut self, i: usize, j: usize) {
        let (yi, yj) = (self.y[i], self.y[j]);
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = yi * yj * self.kij(i, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let mut quad = self.kij(i, i) + self.kij(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = self.kij(i, i) + self.kij(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..self.n {
            self.grad[t] += self.y[t] * (yi * di * self.kij(t, i) + yj * dj * self.kij(t, j));
        }
    }

    /// 0.5 a'Qa - e'a, the negated dual objective.
    fn objective(&self) -> f64 {
        0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }

    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            if self.alpha[t] >= self.c {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else if self.alpha[t] <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            0.5 * (ub + lb)
        }
    }
}

pub(crate) fn fit(params: &SvmParams, cols: &[&[f64]], labels01: &[f64]) -> Result<(SvmModel, Diagnostics)> {
    let n = labels01.len();
    let scaler = Standardizer::fit(cols);
    let rows: Vec<Vec<f64>> =
        (0..n).map(|i| cols.iter().enumerate().map(|(j, c)| scaler.apply(j, c[i])).collect()).collect();
    let kernel = Kernel::from_params(params, cols.len());
    let mut q = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = kernel.eval(&rows[a], &rows[b]);
            q[a * n + b] = v;
            q[b * n + a] = v;
        }
    }
    let y: Vec<f64> = labels01.iter().map(|&l| if l > 0.5 { 1.0 } else { -1.0 }).collect();
    let mut smo = Smo { q: &q, n, y: &y, c: params.c, alpha: vec![0.0; n], grad: vec![-1.0; n] };

    let mut trace = vec![smo.objective()];
    let mut converged = false;
    let mut gap = f64::INFINITY;
    for _ in 0..params.max_iter {
        let (pair, g) = smo.select();
        gap = g;
        if g <= params.tol {
            converged = true;
            break;
        }
        let Some((i, j)) = pair else {
            converged = true;
            break;
        };
        smo.update(i, j);
        trace.push(smo.objective());
    }
    if !converged {
        gap = smo.select().1;
        converged = gap <= params.tol;
    }
    let rho = smo.rho();
    let mut support = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if smo.alpha[t] > 0.0 {
            support.push(rows[t].clone());
            dual_coef.push(smo.alpha[t] * y[t]);
        }
    }
    let mut diagnostics =
        Diagnostics { converged, loss_trace: trace, kkt_violation: Some(gap), ..Diagnostics::default() };
    if !converged {
        diagnostics.notes.push(format!("iteration cap {} reached with KKT gap {gap:.3e}", params.max_iter));
    }
    Ok((SvmModel { scaler, kernel, support, dual_coef, rho }, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = f64::from(i) * 0.37;
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            a.push(3.0 * side + t.sin());
            b.push(2.0 * side + (1.7 * t).cos());
            y.push(if side > 0.0 { 1.0 } else { 0.0 });
        }
        (a, b, y)
    }

    #[test]
    fn separable_clouds_fully_fit_by_every_kernel() {
        let (a, b, y) = clouds();
        for kernel in [KernelKind::Linear, KernelKind::Rbf, KernelKind::Polynomial] {
            let params = SvmParams { kernel, c: 10.0, coef0: 1.0, ..SvmParams::default() };
            let (m, d) = fit(&params, &[&a, &b], &y).unwrap();
            assert!(d.converged, "{kernel:?}");
            assert!(d.kkt_violation.unwrap() <= 1e-3);
            let p = m.predict(&[&a, &b], 20);
            for (pi, yi) in p.iter().zip(&y) {
                assert_eq!(*pi >= 0.5, *yi == 1.0, "{kernel:?}");
            }
        }
    }

    #[test]
    fn dual_objective_monotone_and_feasible() {
        let x: Vec<f64> = (0..30).map(|i| f64::from((i * 13) % 30)).collect();
        let z: Vec<f64> = (0..30).map(|i| f64::from((i * 7) % 11)).collect();
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| f64::from(a + 2.0 * b > 25.0)).collect();
        let params = SvmParams { kernel: KernelKind::Rbf, ..SvmParams::default() };
        let (m, d) = fit(&params, &[&x, &z], &y).unwrap();
        assert!(d.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let sum: f64 = m.dual_coef.iter().sum();
        assert!(sum.abs() < 1e-9);
        assert!(m.dual_coef.iter().all(|c| c.abs() <= params.c + 1e-12));
    }

    #[test]
    fn linear_weight_favors_informative_gene() {
        let (a, _, y) = clouds();
        let noise: Vec<f64> = (0..20).map(|i| f64::from((i * 7) % 5)).collect();
        let (m, _) = fit(&SvmParams::default(), &[&noise, &a], &y).unwrap();
        let (imp, kind) = m.importance();
        assert_eq!(kind, ScoreKind::AbsWeight);
        assert!(imp[1] > imp[0]);
        let rbf = SvmParams { kernel: KernelKind::Rbf, ..SvmParams::default() };
        let (m, _) = fit(&rbf, &[&noise, &a], &y).unwrap();
        let (imp, kind) = m.importance();
        assert_eq!(kind, ScoreKind::Importance);
        assert!(imp[1] > imp[0]);
    }
}
