use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patients by genes, stored column-major so per-gene scans are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    n_patients: usize,
    gene_ids: Vec<String>,
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl ExpressionMatrix {
    /// Builds a matrix from one vector per gene.
    pub fn from_columns(gene_ids: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if gene_ids.len() != columns.len() {
            return Err(Error::Dimension(format!("{} gene ids for {} columns", gene_ids.len(), columns.len())));
        }
        let n = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * columns.len());
        for (id, col) in gene_ids.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Dimension(format!("column {id} has {} rows, expected {n}", col.len())));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Input(format!(
                    "column {id} holds {v}; expression values must be finite and nonnegative"
                )));
            }
            values.extend_from_slice(col);
        }
        Self::assemble(n, gene_ids, values)
    }

    /// Builds a matrix from patient rows.
    pub fn from_rows(gene_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = gene_ids.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("row {i} has {} values, expected {p}", row.len())));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        if p == 0 {
            return Self::assemble(rows.len(), gene_ids, Vec::new());
        }
        Self::from_columns(gene_ids, columns)
    }

    fn assemble(n_patients: usize, gene_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let mut index = HashMap::with_capacity(gene_ids.len());
        for (j, id) in gene_ids.iter().enumerate() {
            if index.insert(id.clone(), j).is_some() {
                return Err(Error::Input(format!("duplicate gene id {id}")));
            }
        }
        Ok(Self { n_patients, gene_ids, values, index })
    }

    pub fn n_patients(&self) -> usize {
        self.n_patients
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_patients..(j + 1) * self.n_patients]
    }

    /// Column for a gene id, or a schema error when it is absent.
    pub fn column_by_id(&self, id: &str) -> Result<&[f64]> {
        self.gene_index(id).map(|j| self.column(j)).ok_or_else(|| Error::MissingGene(id.to_string()))
    }

    pub fn get(&self, row: usize, gene: usize) -> f64 {
        self.values[gene * self.n_patients + row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_genes()).map(|j| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_genes());
        for j in 0..self.n_genes() {
            let col = self.column(j);
            values.extend(rows.iter().map(|&i| col[i]));
        }
        Self { n_patients: rows.len(), gene_ids: self.gene_ids.clone(), values, index: self.index.clone() }
    }

    pub fn select_genes<S: AsRef<str>>(&self, genes: &[S]) -> Result<Self> {
        let mut values = Vec::with_capacity(genes.len() * self.n_patients);
        let mut ids = Vec::with_capacity(genes.len());
        for g in genes {
            values.extend_from_slice(self.column_by_id(g.as_ref())?);
            ids.push(g.as_ref().to_string());
        }
        Self::assemble(self.n_patients, ids, values)
    }
}

/// An expression matrix with binary labels (1 = diseased) and, for synthetic
/// cohorts, the genes that actually drive the label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: ExpressionMatrix,
    pub labels: Vec<u8>,
    pub truth: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(matrix: ExpressionMatrix, labels: Vec<u8>, truth: Option<Vec<String>>) -> Result<Self> {
        if labels.len() != matrix.n_patients() {
            return Err(Error::Dimension(format!("{} labels for {} patients", labels.len(), matrix.n_patients())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Input(format!("label {bad} is not binary")));
        }
        Ok(Self { matrix, labels, truth })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// (normal count, diseased count)
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    pub fn require_both_classes(&self, min_per_class: usize) -> Result<()> {
        let (n0, n1) = self.class_counts();
        if n0 < min_per_class || n1 < min_per_class {
            return Err(Error::Class(format!(
                "need at least {min_per_class} patients per class, have {n0} normal and {n1} diseased"
            )));
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            truth: self.truth.clone(),
        }
    }

    pub fn with_genes<S: AsRef<str>>(&self, genes: &[S]) -> Result<Self> {
        Ok(Self { matrix: self.matrix.select_genes(genes)?, labels: self.labels.clone(), truth: self.truth.clone() })
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }
}

/// Per-column mean and sample standard deviation, used by every learner that
/// works on unit-variance inputs. Constant columns get `sd = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(columns: &[&[f64]]) -> Self {
        let mut means = Vec::with_capacity(columns.len());
        let mut sds = Vec::with_capacity(columns.len());
        for col in columns {
            let (m, s) = mean_sd(col);
            means.push(m);
            sds.push(s);
        }
        Self { means, sds }
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.sds[j].is_nan() || self.sds[j] <= 1e-12 * self.means[j].abs().max(1.0)
    }

    pub fn apply(&self, j: usize, x: f64) -> f64 {
        if self.is_constant(j) {
            0.0
        } else {
            (x - self.means[j]) / self.sds[j]
        }
    }

    pub fn transform(&self, j: usize, col: &[f64]) -> Vec<f64> {
        col.iter().map(|&x| self.apply(j, x)).collect()
    }
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Orders ids like `X2` before `X10`; falls back to plain string order.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        (&s[..cut], s[cut..].parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then_with(|| a.cmp(b))
}

pub fn sorted_natural(mut ids: Vec<String>) -> Vec<String> {
    ids.sort_by(|a, b| natural_cmp(a, b));
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(p: usize) -> Vec<String> {
        (1..=p).map(|j| format!("X{j}")).collect()
    }

    #[test]
    fn rejects_negative_and_duplicates() {
        assert!(ExpressionMatrix::from_columns(ids(1), vec![vec![1.0, -0.5]]).is_err());
        let dup = vec!["A".to_string(), "A".to_string()];
        assert!(ExpressionMatrix::from_columns(dup, vec![vec![1.0], vec![2.0]]).is_err());
        assert!(ExpressionMatrix::from_columns(ids(2), vec![vec![1.0], vec![2.0, 3.0]]).is_err());
    }

    #[test]
    fn rows_and_columns_agree() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let m = ExpressionMatrix::from_rows(ids(3), &rows).unwrap();
        assert_eq!(m.n_patients(), 2);
        assert_eq!(m.column(1), &[2.0, 5.0]);
        assert_eq!(m.row(1), rows[1]);
        let sub = m.select_genes(&["X3", "X1"]).unwrap();
        assert_eq!(sub.column(0), &[3.0, 6.0]);
        assert!(matches!(m.select_genes(&["X9"]), Err(Error::MissingGene(_))));
        assert_eq!(m.select_rows(&[1]).column(2), &[6.0]);
    }

    #[test]
    fn labels_must_match_and_be_binary() {
        let m = ExpressionMatrix::from_rows(ids(1), &[vec![1.0], vec![2.0]]).unwrap();
        assert!(LabeledDataset::new(m.clone(), vec![0], None).is_err());
        assert!(LabeledDataset::new(m.clone(), vec![0, 2], None).is_err());
        let d = LabeledDataset::new(m, vec![0, 1], None).unwrap();
        assert_eq!(d.class_counts(), (1, 1));
    }

    #[test]
    fn natural_order() {
        let v = sorted_natural(vec!["X10".into(), "X2".into(), "X1".into()]);
        assert_eq!(v, vec!["X1", "X2", "X10"]);
    }
}
