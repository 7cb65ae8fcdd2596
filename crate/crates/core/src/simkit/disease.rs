use std::fmt;

use serde::{Deserialize, Serialize};

use super::cohort::{gen_cohort, CorrelationParams};
use crate::data::{ExpressionMatrix, LabeledDataset};
use crate::error::{Error, Result};

/// The labeling rules shipped with the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum DiseaseId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
    D9,
    D10,
    D11,
    D101,
    D102,
    D103,
}

impl DiseaseId {
    pub const ALL: [DiseaseId; 14] = [
        DiseaseId::D1,
        DiseaseId::D2,
        DiseaseId::D3,
        DiseaseId::D4,
        DiseaseId::D5,
        DiseaseId::D6,
        DiseaseId::D7,
        DiseaseId::D8,
        DiseaseId::D9,
        DiseaseId::D10,
        DiseaseId::D11,
        DiseaseId::D101,
        DiseaseId::D102,
        DiseaseId::D103,
    ];

    pub fn number(self) -> u32 {
        match self {
            DiseaseId::D1 => 1,
            DiseaseId::D2 => 2,
            DiseaseId::D3 => 3,
            DiseaseId::D4 => 4,
            DiseaseId::D5 => 5,
            DiseaseId::D6 => 6,
            DiseaseId::D7 => 7,
            DiseaseId::D8 => 8,
            DiseaseId::D9 => 9,
            DiseaseId::D10 => 10,
            DiseaseId::D11 => 11,
            DiseaseId::D101 => 101,
            DiseaseId::D102 => 102,
            DiseaseId::D103 => 103,
        }
    }

    /// Number of leading columns the rule reads.
    pub fn causal_count(self) -> usize {
        match self {
            DiseaseId::D1 => 1,
            DiseaseId::D2 => 2,
            DiseaseId::D10 => 5,
            DiseaseId::D11 => 10,
            _ => 3,
        }
    }

    /// Rules thresholded at a per-cohort median score.
    pub fn uses_balanced_cutoff(self) -> bool {
        !matches!(self, DiseaseId::D1 | DiseaseId::D101 | DiseaseId::D102 | DiseaseId::D103)
    }
}

impl TryFrom<u32> for DiseaseId {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        DiseaseId::ALL
            .into_iter()
            .find(|d| d.number() == v)
            .ok_or_else(|| Error::Spec(format!("unknown disease id {v}")))
    }
}

impl From<DiseaseId> for u32 {
    fn from(d: DiseaseId) -> u32 {
        d.number()
    }
}

impl fmt::Display for DiseaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Disease{}", self.number())
    }
}

/// Label threshold: the single-gene rule's constant, a calibrated score cutoff,
/// or the built-in conjunction thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Score(f64),
    Conjunction,
}

pub const DISEASE1_CUTOFF: f64 = 53.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseSpec {
    pub disease: DiseaseId,
    /// 0-based column positions read by the rule.
    pub causal_genes: Vec<usize>,
    pub threshold: Threshold,
    pub centering_means: Option<[f64; 3]>,
}

impl DiseaseSpec {
    /// Spec for a rule with an explicit score cutoff.
    pub fn with_cutoff(disease: DiseaseId, cutoff: f64, centering_means: Option<[f64; 3]>) -> Self {
        let threshold = match disease {
            DiseaseId::D101 | DiseaseId::D102 | DiseaseId::D103 => Threshold::Conjunction,
            _ => Threshold::Score(cutoff),
        };
        Self { disease, causal_genes: (0..disease.causal_count()).collect(), threshold, centering_means }
    }

    /// Calibrates the rule on `matrix`: median cutoff for score rules, sample
    /// means of X1..X3 for Disease5, built-in constants otherwise.
    pub fn calibrate(disease: DiseaseId, matrix: &ExpressionMatrix) -> Result<Self> {
        check_width(disease, matrix)?;
        match disease {
            DiseaseId::D1 => Ok(Self::with_cutoff(disease, DISEASE1_CUTOFF, None)),
            DiseaseId::D101 | DiseaseId::D102 | DiseaseId::D103 => Ok(Self::with_cutoff(disease, 0.0, None)),
            _ => {
                let means = (disease == DiseaseId::D5).then(|| {
                    let mut mu = [0.0; 3];
                    for (k, m) in mu.iter_mut().enumerate() {
                        let col = matrix.column(k);
                        *m = col.iter().sum::<f64>() / col.len() as f64;
                    }
                    mu
                });
                let probe = Self::with_cutoff(disease, 0.0, means);
                let scores: Vec<f64> =
                    (0..matrix.n_patients()).map(|i| probe.score(matrix, i)).collect::<Result<_>>()?;
                Ok(Self::with_cutoff(disease, balanced_cutoff(&scores)?, means))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.disease, self.centering_means.is_some()) {
            (DiseaseId::D5, false) => Err(Error::Spec("Disease5 requires centering means".into())),
            (DiseaseId::D5, true) => Ok(()),
            (d, true) => Err(Error::Spec(format!("{d} takes no centering means"))),
            _ => Ok(()),
        }
    }

    pub fn causal_ids(&self, matrix: &ExpressionMatrix) -> Vec<String> {
        self.causal_genes.iter().map(|&j| matrix.gene_ids()[j].clone()).collect()
    }

    /// Continuous disease score of one patient. Conjunction rules have no score.
    pub fn score(&self, m: &ExpressionMatrix, i: usize) -> Result<f64> {
        let x = |k: usize| m.get(i, k);
        let s = match self.disease {
            DiseaseId::D1 => x(0),
            DiseaseId::D2 => 2.0 * x(0) + x(1),
            DiseaseId::D3 => 2.0 * x(0) + 0.7 * x(1) + 1.5 * x(2),
            DiseaseId::D4 => x(0) * x(0) + x(1) + x(2),
            DiseaseId::D5 => {
                let mu = self.centering_means.ok_or_else(|| Error::Spec("Disease5 requires centering means".into()))?;
                let d1 = x(0) - mu[0];
                d1 * d1 + (x(1) - mu[1]) + (x(2) - mu[2])
            }
            DiseaseId::D6 => x(0) * x(0) + x(1) * x(1) + x(2),
            DiseaseId::D7 => x(0) * x(1) + x(1) * x(2) + x(0) * x(2),
            DiseaseId::D8 => x(0) * x(1) * x(2),
            DiseaseId::D9 => {
                let (a, b, c) = (x(0), x(1), x(2));
                a + b + c + a * b + b * c + c * a + a * b * c
            }
            DiseaseId::D10 => (0..5).map(x).product(),
            DiseaseId::D11 => (0..10).map(x).product(),
            d @ (DiseaseId::D101 | DiseaseId::D102 | DiseaseId::D103) => {
                return Err(Error::Spec(format!("{d} is a threshold conjunction without a score")))
            }
        };
        Ok(s)
    }

    fn label_row(&self, m: &ExpressionMatrix, i: usize) -> Result<u8> {
        let x = |k: usize| m.get(i, k);
        let positive = match (self.disease, self.threshold) {
            (DiseaseId::D101, _) => x(0) > 27.0 && x(1) > 70.0 && x(2) < 220.0,
            (DiseaseId::D102, _) => x(0) > 23.0 && x(1) > 34.0 && x(2) < 180.0,
            (DiseaseId::D103, _) => x(0) * x(1) > 300.0 && x(2) < 140.0,
            // low expression is the diseased side for the linear rules
            (DiseaseId::D1 | DiseaseId::D2 | DiseaseId::D3, Threshold::Score(c)) => self.score(m, i)? <= c,
            (_, Threshold::Score(c)) => self.score(m, i)? > c,
            (d, Threshold::Conjunction) => {
                return Err(Error::Spec(format!("{d} needs a score cutoff")));
            }
        };
        Ok(u8::from(positive))
    }
}

fn check_width(disease: DiseaseId, matrix: &ExpressionMatrix) -> Result<()> {
    if matrix.n_genes() < disease.causal_count() {
        return Err(Error::Dimension(format!(
            "{disease} reads {} genes but the matrix has {}",
            disease.causal_count(),
            matrix.n_genes()
        )));
    }
    Ok(())
}

/// Median of `scores` (mean of the central pair for even n).
pub fn balanced_cutoff(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::Input(format!("need at least 2 scores, got {}", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateCutoff(scores.len()));
    }
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// Applies the rule to every patient. Truth is the rule's causal gene ids.
pub fn label(spec: &DiseaseSpec, matrix: &ExpressionMatrix) -> Result<LabeledDataset> {
    spec.validate()?;
    let needed = spec.causal_genes.iter().max().map_or(0, |&j| j + 1);
    if matrix.n_genes() < needed {
        return Err(Error::Dimension(format!(
            "{} reads {needed} genes but the matrix has {}",
            spec.disease,
            matrix.n_genes()
        )));
    }
    let labels = (0..matrix.n_patients()).map(|i| spec.label_row(matrix, i)).collect::<Result<Vec<_>>>()?;
    let truth = spec.causal_ids(matrix);
    LabeledDataset::new(matrix.clone(), labels, Some(truth))
}

/// Generate, calibrate and label in one call.
pub fn simulate(
    disease: DiseaseId,
    n: usize,
    p: usize,
    params: &CorrelationParams,
    seed: u64,
) -> Result<LabeledDataset> {
    let matrix = gen_cohort(n, p, params, seed)?;
    let spec = DiseaseSpec::calibrate(disease, &matrix)?;
    label(&spec, &matrix)
}
