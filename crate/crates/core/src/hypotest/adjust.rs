use serde::{Deserialize, Serialize};

use super::welch::TestResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustmentMethod {
    Bonferroni,
    Bh,
    AdaptiveBh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResult {
    pub method: AdjustmentMethod,
    pub q: f64,
    pub adjusted_p: Vec<f64>,
    /// Indices into the input vector, ascending.
    pub rejected: Vec<usize>,
}

/// Indices sorted by (p, index).
fn order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    idx
}

/// Step-up BH: (adjusted p-values, number rejected, sort order).
fn step_up(p: &[f64], q: f64) -> (Vec<f64>, usize, Vec<usize>) {
    let m = p.len();
    let ord = order(p);
    let mf = m as f64;
    let mut cutoff_rank = 0;
    for (r, &i) in ord.iter().enumerate() {
        if p[i] <= (r + 1) as f64 * q / mf {
            cutoff_rank = r + 1;
        }
    }
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (r, &i) in ord.iter().enumerate().rev() {
        running = running.min(mf * p[i] / (r + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    (adjusted, cutoff_rank, ord)
}

fn take_sorted(ord: &[usize], k: usize) -> Vec<usize> {
    let mut v = ord[..k].to_vec();
    v.sort_unstable();
    v
}

pub fn adjust(p: &[f64], method: AdjustmentMethod, q: f64) -> Result<AdjustmentResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Input(format!("q must lie in (0, 1), got {q}")));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mf = m as f64;
    let (adjusted_p, rejected) = match method {
        AdjustmentMethod::Bonferroni => {
            let adj: Vec<f64> = p.iter().map(|v| (mf * v).min(1.0)).collect();
            let rej = (0..m).filter(|&i| p[i] <= q / mf).collect();
            (adj, rej)
        }
        AdjustmentMethod::Bh => {
            let (adj, k, ord) = step_up(p, q);
            (adj, take_sorted(&ord, k))
        }
        AdjustmentMethod::AdaptiveBh => {
            let (_, r1, _) = step_up(p, q / (1.0 + q));
            let m0 = m - r1;
            if m0 == 0 {
                (p.to_vec(), (0..m).collect())
            } else {
                let (bh_adj, k, ord) = step_up(p, q * mf / m0 as f64);
                let shrink = m0 as f64 / mf;
                let adj = bh_adj.iter().zip(p).map(|(a, &raw)| (a * shrink).max(raw).min(1.0)).collect();
                (adj, take_sorted(&ord, k))
            }
        }
    };
    Ok(AdjustmentResult { method, q, adjusted_p, rejected })
}

/// Gene ids rejected by `method` at level `q` over a Welch scan.
pub fn fdr_select(scan: &[TestResult], method: AdjustmentMethod, q: f64) -> Result<Vec<String>> {
    let p: Vec<f64> = scan.iter().map(|r| r.p_value).collect();
    let res = adjust(&p, method, q)?;
    Ok(res.rejected.iter().map(|&i| scan[i].gene_id.clone()).collect())
}
