use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tdist::t_two_sided_p;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub gene_id: String,
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Both groups had zero variance with different means.
    pub degenerate_variance: bool,
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t test of `group1` against `group0`; the returned
/// `gene_id` is empty.
pub fn welch_t(group0: &[f64], group1: &[f64]) -> Result<TestResult> {
    if group0.len() < 2 || group1.len() < 2 {
        return Err(Error::Input(format!(
            "each group needs at least 2 observations, got {} and {}",
            group0.len(),
            group1.len()
        )));
    }
    if group0.iter().chain(group1).any(|v| !v.is_finite()) {
        return Err(Error::Input("test inputs must be finite".into()));
    }
    let (n0, n1) = (group0.len() as f64, group1.len() as f64);
    let (m0, v0) = moments(group0);
    let (m1, v1) = moments(group1);
    let (a0, a1) = (v0 / n0, v1 / n1);
    let se2 = a0 + a1;
    let pooled_df = n0 + n1 - 2.0;

    if se2 <= 0.0 {
        let (t, p, degenerate) =
            if m0 == m1 { (0.0, 1.0, false) } else { (f64::INFINITY.copysign(m1 - m0), 0.0, true) };
        return Ok(TestResult {
            gene_id: String::new(),
            t_statistic: t,
            df: pooled_df,
            p_value: p,
            degenerate_variance: degenerate,
        });
    }
    let t = (m1 - m0) / se2.sqrt();
    let df = se2 * se2 / (a0 * a0 / (n0 - 1.0) + a1 * a1 / (n1 - 1.0));
    Ok(TestResult {
        gene_id: String::new(),
        t_statistic: t,
        df,
        p_value: t_two_sided_p(t, df),
        degenerate_variance: false,
    })
}

/// Diseased-versus-normal Welch test for every gene, in column order.
pub fn testwise_scan(data: &LabeledDataset) -> Result<Vec<TestResult>> {
    data.require_both_classes(2)?;
    let m = &data.matrix;
    (0..m.n_genes())
        .into_par_iter()
        .map(|j| {
            let col = m.column(j);
            let mut g0 = Vec::with_capacity(col.len());
            let mut g1 = Vec::with_capacity(col.len());
            for (&v, &l) in col.iter().zip(&data.labels) {
                if l == 1 {
                    g1.push(v)
                } else {
                    g0.push(v)
                }
            }
            let mut r = welch_t(&g0, &g1)?;
            r.gene_id = m.gene_ids()[j].clone();
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpressionMatrix;

    #[test]
    fn identical_groups() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_groups_against_t4_closed_form() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        let t = 3.0 / (2.0f64 / 3.0).sqrt();
        assert!((r.t_statistic - t).abs() < 1e-12);
        assert!((r.t_statistic - 3.674).abs() < 1e-3);
        assert!((r.df - 4.0).abs() < 1e-12);
        // t(4) two-sided tail: 1 - t(6 + t^2) / (t^2 + 4)^{3/2}
        let exact = 1.0 - t * (6.0 + t * t) / (t * t + 4.0).powf(1.5);
        assert!((r.p_value - exact).abs() < 1e-12);
        assert!((r.p_value - 0.0213).abs() < 1e-4);
    }

    #[test]
    fn equal_variance_shift_collapses_df() {
        let g0 = [1.0, 4.0, 2.5, 7.0, 3.0];
        let g1: Vec<f64> = g0.iter().map(|v| v + 10.0).collect();
        let r = welch_t(&g0, &g1).unwrap();
        assert!((r.df - 8.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_cases() {
        let r = welch_t(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((r.t_statistic, r.p_value, r.degenerate_variance), (0.0, 1.0, false));
        let r = welch_t(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(r.degenerate_variance);
        assert!(r.df > 0.0);
    }

    #[test]
    fn too_small_groups() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn scan_orders_and_finds_label_gene() {
        let labels = vec![0, 0, 0, 1, 1, 1, 0, 1];
        let label_gene: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let noise = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let flat = vec![5.0, 3.0, 5.0, 8.0, 9.0, 7.0, 9.0, 3.0];
        let m =
            ExpressionMatrix::from_columns(vec!["N1".into(), "L".into(), "N2".into()], vec![noise, label_gene, flat])
                .unwrap();
        let d = LabeledDataset::new(m, labels, None).unwrap();
        let scan = testwise_scan(&d).unwrap();
        let ids: Vec<&str> = scan.iter().map(|r| r.gene_id.as_str()).collect();
        assert_eq!(ids, ["N1", "L", "N2"]);
        assert_eq!(scan[1].p_value, 0.0);
        assert!(scan.iter().all(|r| r.p_value >= scan[1].p_value));
    }

    #[test]
    fn one_class_scan_rejected() {
        let m = ExpressionMatrix::from_columns(vec!["A".into()], vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let d = LabeledDataset::new(m, vec![1, 1, 1], None).unwrap();
        assert!(testwise_scan(&d).is_err());
    }
}
