use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::selection_metrics;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::learners::{fit, ModelSpec};
use crate::rng::{derive_seed, shuffle, stream_rng};
use crate::screen::GeneRanking;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Loocv,
    Split { train_fraction: f64 },
    Kfold { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub row: usize,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub seed: u64,
    pub n: usize,
    pub error_rate: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_error: Option<f64>,
    pub posteriors: Vec<HeldOut>,
    pub selected_genes: Vec<String>,
    /// `None` when nothing was selected or the truth is unknown.
    pub fd_rate: Option<f64>,
    /// `None` when the truth is unknown.
    pub fnd_set: Option<Vec<String>>,
    /// Folds skipped because their training part held a single class.
    pub excluded_folds: usize,
    pub separated: bool,
    pub converged: bool,
    /// Importance ranking of the full-data fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<GeneRanking>,
}

impl EvalReport {
    fn assemble(
        scheme: Scheme,
        seed: u64,
        data: &LabeledDataset,
        posteriors: Vec<HeldOut>,
        error_rate: f64,
        selection_fit: &crate::learners::FittedModel,
    ) -> Result<Self> {
        let selected_genes = selection_fit.selected_genes();
        let (fd_rate, fnd_set) = match data.truth.as_deref() {
            Some(truth) if !truth.is_empty() => {
                let m = selection_metrics(&selected_genes, truth)?;
                (m.fd_rate, Some(m.fnd_set))
            }
            _ => (None, None),
        };
        Ok(Self {
            scheme,
            seed,
            n: data.n(),
            error_rate,
            accuracy: 1.0 - error_rate,
            training_error: None,
            posteriors,
            selected_genes,
            fd_rate,
            fnd_set,
            excluded_folds: 0,
            separated: selection_fit.diagnostics.separated,
            converged: selection_fit.diagnostics.converged,
            ranking: Some(selection_fit.gene_importance()),
        })
    }
}

fn misclassified(h: &HeldOut) -> bool {
    u8::from(h.probability >= 0.5) != h.label
}

/// Fold index per row: each class is shuffled and dealt round-robin, the deal
/// continuing across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Parameter(format!("{k} folds for {} rows", labels.len())));
    }
    let mut assignment = vec![0; labels.len()];
    let mut dealt = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = stream_rng(seed, u64::from(class));
        shuffle(&mut rng, &mut rows);
        for r in rows {
            assignment[r] = dealt % k;
            dealt += 1;
        }
    }
    Ok(assignment)
}

/// (train rows, validation rows), both ascending, with each class split at
/// `train_fraction`. Redraws up to 100 times until both parts hold both classes.
pub fn stratified_split(labels: &[u8], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    for attempt in 0..100u64 {
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for class in [0u8, 1] {
            let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let mut rng = stream_rng(derive_seed(seed, attempt), u64::from(class));
            shuffle(&mut rng, &mut rows);
            let cut = (train_fraction * rows.len() as f64).round() as usize;
            train.extend_from_slice(&rows[..cut]);
            valid.extend_from_slice(&rows[cut..]);
        }
        let has_both = |rows: &[usize]| rows.iter().any(|&i| labels[i] == 0) && rows.iter().any(|&i| labels[i] == 1);
        if has_both(&train) && has_both(&valid) {
            train.sort_unstable();
            valid.sort_unstable();
            return Ok((train, valid));
        }
    }
    Err(Error::Stratification(format!(
        "no split at fraction {train_fraction} puts both classes on both sides after 100 draws"
    )))
}

/// Leave-one-out: `n` fits, each predicting its held-out row.
pub fn loocv(spec: &ModelSpec, data: &LabeledDataset, genes: &[String], seed: u64) -> Result<EvalReport> {
    if data.n() < 3 {
        return Err(Error::Input(format!("leave-one-out needs at least 3 rows, got {}", data.n())));
    }
    data.require_both_classes(2)?;
    let data = data.with_genes(genes)?;
    let n = data.n();
    let folds: Vec<Result<Option<HeldOut>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let train_rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let train = data.subset(&train_rows);
            let (n0, n1) = train.class_counts();
            if n0 == 0 || n1 == 0 {
                return Ok(None);
            }
            let model = fit(spec, &train, genes, derive_seed(seed, i as u64))?;
            let held = data.matrix.select_rows(&[i]);
            let p = model.predict(&held)?.probabilities[0];
            Ok(Some(HeldOut { row: i, probability: p, label: data.labels[i] }))
        })
        .collect();
    let mut posteriors = Vec::with_capacity(n);
    let mut excluded = 0;
    for f in folds {
        match f? {
            Some(h) => posteriors.push(h),
            None => excluded += 1,
        }
    }
    if posteriors.is_empty() {
        return Err(Error::Class("every leave-one-out fold was one-class".into()));
    }
    let errors = posteriors.iter().filter(|h| misclassified(h)).count();
    let error_rate = errors as f64 / posteriors.len() as f64;
    let full = fit(spec, &data, genes, seed)?;
    let mut report = EvalReport::assemble(Scheme::Loocv, seed, &data, posteriors, error_rate, &full)?;
    report.excluded_folds = excluded;
    Ok(report)
}

/// One stratified train/validation split; reports both errors.
pub fn split_eval(
    spec: &ModelSpec,
    data: &LabeledDataset,
    genes: &[String],
    train_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    let (train_rows, valid_rows) = stratified_split(&data.labels, train_fraction, seed)?;
    let data = data.with_genes(genes)?;
    let train = data.subset(&train_rows);
    let model = fit(spec, &train, genes, seed)?;
    let training_error = {
        let p = model.predict(&train.matrix)?;
        p.labels().iter().zip(&train.labels).filter(|(a, b)| a != b).count() as f64 / train.n() as f64
    };
    let valid = data.subset(&valid_rows);
    let probs = model.predict(&valid.matrix)?.probabilities;
    let posteriors: Vec<HeldOut> = valid_rows
        .iter()
        .zip(probs)
        .zip(&valid.labels)
        .map(|((&row, probability), &label)| HeldOut { row, probability, label })
        .collect();
    let errors = posteriors.iter().filter(|h| misclassified(h)).count();
    let error_rate = errors as f64 / posteriors.len() as f64;
    let mut report =
        EvalReport::assemble(Scheme::Split { train_fraction }, seed, &data, posteriors, error_rate, &model)?;
    report.training_error = Some(training_error);
    Ok(report)
}

/// Stratified k-fold; `error_rate` is one minus the mean per-fold accuracy.
pub fn kfold_eval(
    spec: &ModelSpec,
    data: &LabeledDataset,
    genes: &[String],
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    let assignment = stratified_folds(&data.labels, k, seed)?;
    let data = data.with_genes(genes)?;
    let n = data.n();
    // per fold: None when the training part lacks a class, else (accuracy, held-out rows)
    type Fold = Option<(f64, Vec<HeldOut>)>;
    let folds: Vec<Result<Fold>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let test_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
            let train = data.subset(&train_rows);
            let (n0, n1) = train.class_counts();
            if n0 == 0 || n1 == 0 || test_rows.is_empty() {
                return Ok(None);
            }
            let model = fit(spec, &train, genes, derive_seed(seed, fold as u64))?;
            let test = data.subset(&test_rows);
            let probs = model.predict(&test.matrix)?.probabilities;
            let held: Vec<HeldOut> = test_rows
                .iter()
                .zip(probs)
                .map(|(&row, probability)| HeldOut { row, probability, label: data.labels[row] })
                .collect();
            let correct = held.iter().filter(|h| !misclassified(h)).count();
            Ok(Some((correct as f64 / held.len() as f64, held)))
        })
        .collect();
    let mut accs = Vec::with_capacity(k);
    let mut posteriors = Vec::with_capacity(n);
    let mut excluded = 0;
    for f in folds {
        match f? {
            Some((acc, held)) => {
                accs.push(acc);
                posteriors.extend(held);
            }
            None => excluded += 1,
        }
    }
    if accs.is_empty() {
        return Err(Error::Class("every fold was one-class".into()));
    }
    posteriors.sort_by_key(|h| h.row);
    let mean_acc = accs.iter().sum::<f64>() / accs.len() as f64;
    let full = fit(spec, &data, genes, seed)?;
    let mut report = EvalReport::assemble(Scheme::Kfold { k }, seed, &data, posteriors, 1.0 - mean_acc, &full)?;
    report.accuracy = mean_acc;
    report.excluded_folds = excluded;
    Ok(report)
}

pub fn kfold_accuracy(spec: &ModelSpec, data: &LabeledDataset, genes: &[String], k: usize, seed: u64) -> Result<f64> {
    Ok(kfold_eval(spec, data, genes, k, seed)?.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpressionMatrix;
    use crate::learners::{Family, LogisticParams, TreeParams};

    fn constant_gene(labels: Vec<u8>) -> LabeledDataset {
        let m = ExpressionMatrix::from_columns(vec!["C".into()], vec![vec![1.0; labels.len()]]).unwrap();
        LabeledDataset::new(m, labels, None).unwrap()
    }

    #[test]
    fn majority_vote_loocv_error_is_minority_share() {
        let labels: Vec<u8> = (0..62).map(|i| u8::from(i < 40)).collect();
        let d = constant_gene(labels);
        let spec = ModelSpec::new(Family::Logistic(LogisticParams::default()));
        let r = loocv(&spec, &d, &["C".into()], 0).unwrap();
        assert!((r.error_rate - 22.0 / 62.0).abs() < 1e-15);
        assert_eq!(r.accuracy, 1.0 - r.error_rate);
        assert_eq!(r.posteriors.len(), 62);
        assert_eq!(r.fd_rate, None);
    }

    #[test]
    fn split_rejects_full_training() {
        let d = constant_gene(vec![0, 1, 0, 1, 0, 1]);
        let spec = ModelSpec::new(Family::Tree(TreeParams::default()));
        assert!(matches!(split_eval(&spec, &d, &["C".into()], 1.0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn split_fails_with_singleton_class() {
        assert!(matches!(stratified_split(&[0, 0, 0, 0, 1], 0.75, 1), Err(Error::Stratification(_))));
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
        let a = stratified_folds(&labels, 5, 9).unwrap();
        for f in 0..5 {
            let ones = (0..37).filter(|&i| a[i] == f && labels[i] == 1).count();
            let all = (0..37).filter(|&i| a[i] == f).count();
            assert!((7..=8).contains(&all));
            assert!((2..=3).contains(&ones));
        }
        assert!(stratified_folds(&labels, 40, 0).is_err());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }

    #[test]
    fn memorizer_with_duplicated_rows_scores_perfectly() {
        // two distinct patients, each copied ten times: both folds hold copies of both
        let col: Vec<f64> = (0..20).map(|i| f64::from(i % 2)).collect();
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let m = ExpressionMatrix::from_columns(vec!["G".into()], vec![col]).unwrap();
        let d = LabeledDataset::new(m, labels, None).unwrap();
        let spec = ModelSpec::new(Family::Tree(TreeParams { max_depth: 6, min_leaf: 1 }));
        assert_eq!(kfold_accuracy(&spec, &d, &["G".into()], 2, 0).unwrap(), 1.0);
    }
}
