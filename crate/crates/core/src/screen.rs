//! Gene ranking, cut-to-k pools, and model-driven backward elimination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{pearson, LabeledDataset};
use crate::error::{Error, Result};
use crate::evalkit::{loocv, split_eval};
use crate::hypotest::TestResult;
use crate::learners::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Rsquare,
    Importance,
    AbsWeight,
    AbsStdCoef,
    NegLogP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub gene_id: String,
    pub score: f64,
}

/// Genes ordered by score, highest first; equal scores keep input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneRanking {
    pub score_kind: ScoreKind,
    pub entries: Vec<RankEntry>,
}

impl GeneRanking {
    pub fn from_scores<S: AsRef<str>>(ids: &[S], scores: &[f64], score_kind: ScoreKind) -> Self {
        assert_eq!(ids.len(), scores.len(), "one score per gene");
        let clean = |s: f64| if s.is_nan() { 0.0 } else { s };
        let mut order: Vec<usize> = (0..ids.len()).collect();
        // stable sort keeps the original column order among ties
        order.sort_by(|&a, &b| clean(scores[b]).total_cmp(&clean(scores[a])));
        let entries = order
            .into_iter()
            .map(|i| RankEntry { gene_id: ids[i].as_ref().to_string(), score: clean(scores[i]) })
            .collect();
        Self { score_kind, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.gene_id.clone()).collect()
    }

    /// 0-based position of a gene.
    pub fn rank_of(&self, gene: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.gene_id == gene)
    }

    pub fn score_of(&self, gene: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.gene_id == gene).map(|e| e.score)
    }

    pub fn top(&self, k: usize) -> &[RankEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// Squared correlation of each gene with the 0/1 label.
pub fn rsquare_rank(data: &LabeledDataset) -> Result<GeneRanking> {
    data.require_both_classes(2)?;
    let y = data.labels_f64();
    let m = &data.matrix;
    let scores: Vec<f64> = (0..m.n_genes())
        .into_par_iter()
        .map(|j| {
            let r = pearson(m.column(j), &y);
            (r * r).clamp(0.0, 1.0)
        })
        .collect();
    Ok(GeneRanking::from_scores(m.gene_ids(), &scores, ScoreKind::Rsquare))
}

/// Ranking by `-log10 p` of a Welch scan.
pub fn pvalue_rank(scan: &[TestResult]) -> GeneRanking {
    let ids: Vec<&str> = scan.iter().map(|r| r.gene_id.as_str()).collect();
    let scores: Vec<f64> = scan.iter().map(|r| -r.p_value.max(f64::MIN_POSITIVE).log10()).collect();
    GeneRanking::from_scores(&ids, &scores, ScoreKind::NegLogP)
}

pub fn cut_to(ranking: &GeneRanking, k: usize) -> Vec<String> {
    ranking.top(k).iter().map(|e| e.gene_id.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_size: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_size: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub pool: Vec<String>,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub pool: Vec<String>,
    pub history: Vec<EliminationStep>,
    /// Set when a refit failed and the loop stopped early.
    pub diagnostic: Option<String>,
}

/// Patients at or below this count are validated by LOOCV inside the
/// elimination loop, larger cohorts by one 75/25 split.
pub const ELIMINATION_LOOCV_MAX_N: usize = 120;

fn validation_error(spec: &ModelSpec, data: &LabeledDataset, pool: &[String], seed: u64) -> Result<f64> {
    let report = if data.n() <= ELIMINATION_LOOCV_MAX_N {
        loocv(spec, data, pool, seed)?
    } else {
        split_eval(spec, data, pool, 0.75, seed)?
    };
    Ok(report.error_rate)
}

/// Repeatedly drops the least important gene while validation error does not
/// rise. Returns the last pool whose error was no worse than its parent's.
pub fn backward_eliminate(
    spec: &ModelSpec,
    data: &LabeledDataset,
    pool: &[String],
    stop: StopRule,
    seed: u64,
) -> Result<Elimination> {
    if pool.is_empty() {
        return Err(Error::Input("elimination pool is empty".into()));
    }
    let mut incumbent = pool.to_vec();
    if incumbent.len() <= stop.min_size.max(1) {
        return Ok(Elimination { pool: incumbent, history: Vec::new(), diagnostic: None });
    }
    let mut best_error = validation_error(spec, data, &incumbent, seed)?;
    let mut history = vec![EliminationStep { pool: incumbent.clone(), error_rate: best_error }];
    let mut diagnostic = None;

    while incumbent.len() > stop.min_size.max(1) {
        let fitted = match crate::learners::fit(spec, data, &incumbent, seed) {
            Ok(m) => m,
            Err(e) => {
                diagnostic = Some(format!("refit on {} genes failed: {e}", incumbent.len()));
                break;
            }
        };
        let ranking = fitted.gene_importance();
        // genes the fitted model ignored rank as zero; take the last in pool order among the lowest
        let weakest = incumbent
            .iter()
            .rev()
            .min_by(|a, b| {
                let sa = ranking.score_of(a).unwrap_or(0.0);
                let sb = ranking.score_of(b).unwrap_or(0.0);
                sa.total_cmp(&sb)
            })
            .cloned()
            .expect("pool is nonempty");
        let candidate: Vec<String> = incumbent.iter().filter(|g| **g != weakest).cloned().collect();
        let err = match validation_error(spec, data, &candidate, seed) {
            Ok(e) => e,
            Err(e) => {
                diagnostic = Some(format!("validation on {} genes failed: {e}", candidate.len()));
                break;
            }
        };
        history.push(EliminationStep { pool: candidate.clone(), error_rate: err });
        if err > best_error {
            break;
        }
        best_error = err;
        incumbent = candidate;
    }
    Ok(Elimination { pool: incumbent, history, diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpressionMatrix;

    fn dataset() -> LabeledDataset {
        let labels: Vec<u8> = vec![0, 1, 0, 1, 1, 0, 0, 1];
        let exact: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let constant = vec![4.0; 8];
        let noisy = vec![0.3, 0.9, 0.1, 0.4, 0.8, 0.2, 0.6, 0.7];
        let m = ExpressionMatrix::from_columns(vec!["C".into(), "N".into(), "L".into()], vec![constant, noisy, exact])
            .unwrap();
        LabeledDataset::new(m, labels, None).unwrap()
    }

    #[test]
    fn label_gene_first_constant_zero() {
        let r = rsquare_rank(&dataset()).unwrap();
        assert_eq!(r.entries[0].gene_id, "L");
        assert!((r.entries[0].score - 1.0).abs() < 1e-12);
        assert_eq!(r.score_of("C"), Some(0.0));
        assert!(r.entries.iter().all(|e| (0.0..=1.0).contains(&e.score)));
    }

    #[test]
    fn ties_keep_column_order() {
        let r = GeneRanking::from_scores(&["a", "b", "c", "d"], &[1.0, 2.0, 1.0, 2.0], ScoreKind::Importance);
        assert_eq!(r.ids(), vec!["b", "d", "a", "c"]);
    }

    #[test]
    fn cut_saturates() {
        let r = GeneRanking::from_scores(&["a", "b"], &[0.5, 0.1], ScoreKind::Rsquare);
        assert_eq!(cut_to(&r, 1), vec!["a"]);
        assert_eq!(cut_to(&r, 10), vec!["a", "b"]);
    }

    #[test]
    fn one_gene_pool_unchanged() {
        let spec: ModelSpec = serde_json::from_str(r#"{"family":"tree"}"#).unwrap();
        let out = backward_eliminate(&spec, &dataset(), &["N".to_string()], StopRule::default(), 1).unwrap();
        assert_eq!(out.pool, vec!["N"]);
        assert!(out.history.is_empty());
    }
}
