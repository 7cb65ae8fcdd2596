//! Model families behind one `fit` / `predict` / `gene_importance` surface.

mod boosting;
mod lasso;
mod logistic;
mod mlp;
mod pls;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

pub use boosting::{BoostingModel, BoostingParams};
pub use lasso::{lasso_fixed_lambda, LassoModel, LassoParams};
pub use logistic::{stepwise_select, LogisticModel, LogisticParams, StepwiseParams};
pub use mlp::{mlp_loss_and_grad, MlpModel, MlpParams};
pub use pls::{PlsModel, PlsParams};
pub use svm::{Kernel, KernelKind, SvmModel, SvmParams};
pub use tree::{TreeModel, TreeParams};

use crate::data::{ExpressionMatrix, LabeledDataset};
use crate::error::{Error, Result};
use crate::screen::{GeneRanking, ScoreKind};

/// Learner family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Logistic(#[serde(default)] LogisticParams),
    LogisticStepwise(#[serde(default)] StepwiseParams),
    Pls(#[serde(default)] PlsParams),
    Tree(#[serde(default)] TreeParams),
    Boosting(#[serde(default)] BoostingParams),
    Lasso(#[serde(default)] LassoParams),
    Mlp(#[serde(default)] MlpParams),
    Svm(#[serde(default)] SvmParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Logistic(_) => "logistic",
            Family::LogisticStepwise(_) => "logistic_stepwise",
            Family::Pls(_) => "pls",
            Family::Tree(_) => "tree",
            Family::Boosting(_) => "boosting",
            Family::Lasso(_) => "lasso",
            Family::Mlp(_) => "mlp",
            Family::Svm(_) => "svm",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            Family::Logistic(p) | Family::LogisticStepwise(StepwiseParams { logistic: p, .. }) if p.max_iter == 0 => {
                bad("logistic max_iter must be at least 1".into())
            }
            Family::LogisticStepwise(p) if !(0.0..=1.0).contains(&p.alpha) => {
                bad(format!("stepwise alpha {} outside [0, 1]", p.alpha))
            }
            Family::Pls(p) if p.n_components == 0 => bad("pls needs at least one component".into()),
            Family::Tree(p) if p.max_depth == 0 || p.min_leaf == 0 => {
                bad("tree depth and leaf size must be at least 1".into())
            }
            Family::Boosting(p) if p.n_trees == 0 || p.max_depth == 0 || p.min_leaf == 0 => {
                bad("boosting counts must be at least 1".into())
            }
            Family::Boosting(p) if !(p.shrinkage > 0.0 && p.shrinkage <= 1.0) => {
                bad(format!("shrinkage {} outside (0, 1]", p.shrinkage))
            }
            Family::Boosting(p) if !(p.subsample > 0.0 && p.subsample <= 1.0) => {
                bad(format!("subsample fraction {} outside (0, 1]", p.subsample))
            }
            Family::Lasso(p) if p.cv_folds < 2 || p.n_lambda == 0 => {
                bad("lasso needs at least 2 folds and one lambda".into())
            }
            Family::Mlp(p) if p.hidden == 0 || p.epochs == 0 => bad("mlp counts must be at least 1".into()),
            Family::Svm(p) if p.c.is_nan() || p.c <= 0.0 => bad(format!("svm C must be positive, got {}", p.c)),
            _ => Ok(()),
        }
    }
}

/// How a fitted model's importance ranking becomes a selected gene set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SelectionRule {
    All,
    NonZero,
    TopK { k: usize },
    Threshold { min_score: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRule>,
    /// Display name in reports; defaults to the family name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, selection: None, name: None }
    }

    pub fn with_selection(mut self, rule: SelectionRule) -> Self {
        self.selection = Some(rule);
        self
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.family.name().to_string())
    }

    pub fn selection_rule(&self) -> SelectionRule {
        if let Some(rule) = &self.selection {
            return rule.clone();
        }
        match &self.family {
            Family::Pls(p) => SelectionRule::Threshold { min_score: p.std_coef_cutoff },
            Family::Tree(_) | Family::Boosting(_) | Family::Lasso(_) => SelectionRule::NonZero,
            Family::Logistic(_) | Family::LogisticStepwise(_) | Family::Mlp(_) | Family::Svm(_) => SelectionRule::All,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub separated: bool,
    /// Deviance (logistic, boosting), loss (mlp, lasso) or negated dual objective (svm).
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardized_coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learned {
    Logistic(LogisticModel),
    Pls(PlsModel),
    Tree(TreeModel),
    Boosting(BoostingModel),
    Lasso(LassoModel),
    Mlp(MlpModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    /// Genes the model reads, in fit order.
    pub genes: Vec<String>,
    pub learned: Learned,
    pub diagnostics: Diagnostics,
    /// Training rows, kept for likelihood-based criteria.
    pub n_train: usize,
}

/// Per-row probability of the diseased class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probabilities: Vec<f64>,
}

impl Posterior {
    pub fn labels(&self) -> Vec<u8> {
        self.probabilities.iter().map(|&p| u8::from(p >= 0.5)).collect()
    }
}

fn gather<'a>(m: &'a ExpressionMatrix, genes: &[String]) -> Result<Vec<&'a [f64]>> {
    genes.iter().map(|g| m.column_by_id(g)).collect()
}

/// Trains `spec` on the listed genes of `data`.
pub fn fit(spec: &ModelSpec, data: &LabeledDataset, genes: &[String], seed: u64) -> Result<FittedModel> {
    spec.family.validate()?;
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Class(format!("cannot fit on one-class data ({n0} normal, {n1} diseased)")));
    }
    if genes.is_empty() && !matches!(spec.family, Family::LogisticStepwise(_)) {
        return Err(Error::Input("gene list is empty".into()));
    }
    let y = data.labels_f64();
    let mut genes = genes.to_vec();
    let (learned, diagnostics) = match &spec.family {
        Family::Logistic(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = logistic::fit(p, &cols, &y)?;
            (Learned::Logistic(m), d)
        }
        Family::LogisticStepwise(p) => {
            genes = stepwise_select(p, data, &genes)?;
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = logistic::fit(&p.logistic, &cols, &y)?;
            (Learned::Logistic(m), d)
        }
        Family::Pls(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = pls::fit(p, &cols, &y)?;
            (Learned::Pls(m), d)
        }
        Family::Tree(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = tree::fit(p, &cols, &y)?;
            (Learned::Tree(m), d)
        }
        Family::Boosting(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = boosting::fit(p, &cols, &y, seed)?;
            (Learned::Boosting(m), d)
        }
        Family::Lasso(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = lasso::fit(p, &cols, &data.labels, seed)?;
            (Learned::Lasso(m), d)
        }
        Family::Mlp(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = mlp::fit(p, &cols, &y, seed)?;
            (Learned::Mlp(m), d)
        }
        Family::Svm(p) => {
            let cols = gather(&data.matrix, &genes)?;
            let (m, d) = svm::fit(p, &cols, &y)?;
            (Learned::Svm(m), d)
        }
    };
    Ok(FittedModel { spec: spec.clone(), genes, learned, diagnostics, n_train: data.n() })
}

impl FittedModel {
    pub fn family_name(&self) -> &'static str {
        self.spec.family.name()
    }

    pub fn predict(&self, rows: &ExpressionMatrix) -> Result<Posterior> {
        let cols = gather(rows, &self.genes)?;
        let n = rows.n_patients();
        let probabilities = match &self.learned {
            Learned::Logistic(m) => m.predict(&cols, n),
            Learned::Pls(m) => m.predict(&cols, n),
            Learned::Tree(m) => m.predict(&cols, n),
            Learned::Boosting(m) => m.predict(&cols, n),
            Learned::Lasso(m) => m.predict(&cols, n),
            Learned::Mlp(m) => m.predict(&cols, n),
            Learned::Svm(m) => m.predict(&cols, n),
        };
        Ok(Posterior { probabilities })
    }

    pub fn gene_importance(&self) -> GeneRanking {
        let (scores, kind) = match &self.learned {
            Learned::Logistic(m) => (m.importance(), ScoreKind::AbsStdCoef),
            Learned::Pls(m) => (m.importance(), ScoreKind::AbsStdCoef),
            Learned::Tree(m) => (m.importance.clone(), ScoreKind::Importance),
            Learned::Boosting(m) => (m.importance.clone(), ScoreKind::Importance),
            Learned::Lasso(m) => (m.importance(), ScoreKind::AbsStdCoef),
            Learned::Mlp(m) => (m.importance(), ScoreKind::AbsWeight),
            Learned::Svm(m) => m.importance(),
        };
        GeneRanking::from_scores(&self.genes, &scores, kind)
    }

    /// Genes picked by the `ModelSpec` selection rule.
    pub fn selected_genes(&self) -> Vec<String> {
        let ranking = self.gene_importance();
        match self.spec.selection_rule() {
            SelectionRule::All => self.genes.clone(),
            SelectionRule::NonZero => {
                ranking.entries.iter().filter(|e| e.score > 0.0).map(|e| e.gene_id.clone()).collect()
            }
            SelectionRule::TopK { k } => crate::screen::cut_to(&ranking, k),
            SelectionRule::Threshold { min_score } => {
                ranking.entries.iter().filter(|e| e.score >= min_score).map(|e| e.gene_id.clone()).collect()
            }
        }
    }

    /// Log-likelihood on `data` and the effective parameter count, for
    /// families that define one.
    pub fn log_likelihood(&self, data: &LabeledDataset) -> Result<(f64, usize)> {
        let unsupported = || Error::Unsupported { op: "log-likelihood", family: self.family_name().into() };
        match &self.learned {
            Learned::Logistic(m) => {
                let post = self.predict(&data.matrix)?;
                Ok((bernoulli_ll(&post.probabilities, &data.labels), m.parameter_count()))
            }
            Learned::Mlp(m) => {
                let post = self.predict(&data.matrix)?;
                Ok((bernoulli_ll(&post.probabilities, &data.labels), m.parameter_count()))
            }
            Learned::Pls(m) => {
                let cols = gather(&data.matrix, &self.genes)?;
                let fitted = m.predict_raw(&cols, data.n());
                let rss: f64 = fitted.iter().zip(&data.labels).map(|(f, &l)| (f - f64::from(l)).powi(2)).sum();
                let n = data.n() as f64;
                let sigma2 = (rss / n).max(1e-300);
                let ll = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
                Ok((ll, m.parameter_count()))
            }
            _ => Err(unsupported()),
        }
    }
}

fn bernoulli_ll(p: &[f64], labels: &[u8]) -> f64 {
    const EPS: f64 = 1e-15;
    p.iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            if l == 1 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
