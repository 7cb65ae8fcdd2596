use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::jaccard;
use super::resample::loocv;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::learners::{fit, ModelSpec};
use crate::rng::{derive_seed, sample_indices, stream_rng};
use crate::screen::{cut_to, rsquare_rank};

/// One replicate's pipeline: subsample, R-square prescreen to `prescreen_k`
/// genes, fit `model`, take its selected genes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub subsample_fraction: f64,
    pub prescreen_k: usize,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub rows: Vec<usize>,
    pub selected: Vec<String>,
    /// Leave-one-out accuracy on the subsample, using the prescreened genes.
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub replicates: Vec<ReplicateOutcome>,
    /// Pairwise Jaccard over the successful replicates, in replicate order.
    pub jaccard: Vec<Vec<f64>>,
    pub mean_jaccard: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn replicate_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(master, i)).collect()
}

/// Rows drawn per class at `fraction`, at least two per class.
pub fn stratified_subsample(labels: &[u8], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    let mut rows = Vec::new();
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::Class(format!("class {class} has {} rows, need 2", members.len())));
        }
        let take = ((fraction * members.len() as f64).round() as usize).clamp(2, members.len());
        let mut rng = stream_rng(seed, u64::from(class));
        rows.extend(sample_indices(&mut rng, members.len(), take).into_iter().map(|k| members[k]));
    }
    rows.sort_unstable();
    Ok(rows)
}

fn run_replicate(data: &LabeledDataset, cfg: &StabilityConfig, seed: u64) -> Result<(Vec<usize>, Vec<String>, f64)> {
    let rows = stratified_subsample(&data.labels, cfg.subsample_fraction, seed)?;
    let sub = data.subset(&rows);
    let pool = cut_to(&rsquare_rank(&sub)?, cfg.prescreen_k);
    let model = fit(&cfg.model, &sub, &pool, seed)?;
    let selected = model.selected_genes();
    let report = loocv(&cfg.model, &sub, &pool, seed)?;
    Ok((rows, selected, report.accuracy))
}

/// Runs one replicate per seed. Failed replicates are reported and left out of
/// the Jaccard matrix.
pub fn stability_study(data: &LabeledDataset, cfg: &StabilityConfig, seeds: &[u64]) -> Result<StabilityReport> {
    if cfg.prescreen_k == 0 {
        return Err(Error::Parameter("prescreen size must be at least 1".into()));
    }
    let outcomes: Vec<ReplicateOutcome> = seeds
        .par_iter()
        .map(|&seed| match run_replicate(data, cfg, seed) {
            Ok((rows, selected, acc)) => ReplicateOutcome { seed, rows, selected, accuracy: Some(acc), error: None },
            Err(e) => ReplicateOutcome {
                seed,
                rows: Vec::new(),
                selected: Vec::new(),
                accuracy: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut warnings = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(e) = &o.error {
            warnings.push(format!("replicate {i} excluded: {e}"));
        }
    }
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let k = ok.len();
    let mut matrix = vec![vec![1.0; k]; k];
    let mut off = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let j = jaccard(&ok[a].selected, &ok[b].selected);
            matrix[a][b] = j;
            matrix[b][a] = j;
            off.push(j);
        }
    }
    let mean_jaccard = (!off.is_empty()).then(|| off.iter().sum::<f64>() / off.len() as f64);
    Ok(StabilityReport { replicates: outcomes, jaccard: matrix, mean_jaccard, warnings })
}
