use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hypotest::AdjustmentMethod;
use crate::learners::ModelSpec;
use crate::simkit::{CorrelationParams, DiseaseId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub master_seed: u64,
    pub data: DataSource,
    #[serde(default)]
    pub prescreen: PrescreenConfig,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdr: Option<FdrConfig>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationConfig>,
    /// Emit an importance chart with this many bars for every model cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_top_k: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSource),
    File(FileSource),
}

/// Every (disease, cohort size) pair becomes one data cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub diseases: Vec<DiseaseId>,
    pub n_patients: Vec<usize>,
    pub n_genes: usize,
    #[serde(default)]
    pub params: CorrelationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub path: PathBuf,
    /// Overrides the causal genes recorded in the file, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrescreenKind {
    #[default]
    None,
    Rsquare,
    /// Rank by the importance of `model` fitted on all genes.
    ImportanceCut,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescreenConfig {
    #[serde(default)]
    pub kind: PrescreenKind,
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Genes never admitted to a pool.
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdrScope {
    /// Test every gene in the data cell.
    #[default]
    AllGenes,
    /// Test only the prescreened pool.
    Pool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdrConfig {
    #[serde(default = "default_method")]
    pub method: AdjustmentMethod,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub scope: FdrScope,
}

fn default_method() -> AdjustmentMethod {
    AdjustmentMethod::Bh
}

fn default_q() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Leave-one-out up to `auto_loocv_max_n` patients, a 75/25 split above.
    #[default]
    Auto,
    Loocv,
    Split,
    Kfold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_auto_max")]
    pub auto_loocv_max_n: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Auto,
            train_fraction: default_train_fraction(),
            k: default_k(),
            auto_loocv_max_n: default_auto_max(),
        }
    }
}

fn default_train_fraction() -> f64 {
    0.75
}

fn default_k() -> usize {
    10
}

fn default_auto_max() -> usize {
    110
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub subsample_fraction: f64,
    pub n_replicates: usize,
    pub prescreen_k: usize,
    pub model: ModelSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let DataSource::Synthetic(s) = &self.data {
            if s.diseases.is_empty() || s.n_patients.is_empty() {
                return bad("synthetic source needs at least one disease and one cohort size".into());
            }
            if let Some(n) = s.n_patients.iter().find(|&&n| n < 4) {
                return bad(format!("cohort size {n} is too small"));
            }
            let widest = s.diseases.iter().map(|d| d.causal_count()).max().unwrap_or(0);
            if s.n_genes < widest.max(3) {
                return bad(format!("{} genes cannot hold {widest} causal genes", s.n_genes));
            }
            if let Some(k) = self.prescreen.sizes.iter().find(|&&k| k > s.n_genes) {
                return bad(format!("pool size {k} exceeds the {} genes available", s.n_genes));
            }
            s.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.prescreen.kind != PrescreenKind::None && self.prescreen.sizes.is_empty() {
            return bad("prescreen needs at least one pool size".into());
        }
        if self.prescreen.sizes.contains(&0) {
            return bad("pool sizes must be at least 1".into());
        }
        if self.prescreen.kind == PrescreenKind::ImportanceCut && self.prescreen.model.is_none() {
            return bad("importance_cut prescreen needs a model".into());
        }
        if let Some(f) = &self.fdr {
            if !(f.q > 0.0 && f.q < 1.0) {
                return bad(format!("fdr q {} outside (0, 1)", f.q));
            }
        }
        let e = &self.evaluation;
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return bad(format!("train fraction {} outside (0, 1)", e.train_fraction));
        }
        if e.k < 2 {
            return bad("k-fold needs k >= 2".into());
        }
        if let Some(r) = &self.replication {
            if !(r.subsample_fraction > 0.0 && r.subsample_fraction <= 1.0) || r.n_replicates == 0 || r.prescreen_k == 0
            {
                return bad("replication needs a fraction in (0, 1], replicates >= 1 and a pool size >= 1".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the fully defaulted config in its canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "master_seed": 7,
        "data": {"synthetic": {"diseases": [6, 7], "n_patients": [102], "n_genes": 200}},
        "prescreen": {"kind": "rsquare", "sizes": [100]},
        "models": [{"family": "tree"}, {"family": "boosting", "n_trees": 10}]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.models.len(), 2);
        assert_eq!(c.evaluation.scheme, SchemeKind::Auto);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.evaluation.k = 5;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"master_seed": 1, "data": {"synthetic": {"diseases": [12], "n_patients": [10], "n_genes": 10}}}"#,
            r#"{"master_seed": 1, "data": {"synthetic": {"diseases": [1], "n_patients": [10], "n_genes": 10}}, "prescreen": {"kind": "rsquare", "sizes": [20]}}"#,
            r#"{"master_seed": 1, "data": {"synthetic": {"diseases": [11], "n_patients": [10], "n_genes": 5}}}"#,
            r#"{"master_seed": 1, "data": {"file": {"path": "x.csv"}, "synthetic": {"diseases": [1], "n_patients": [10], "n_genes": 10}}}"#,
            r#"{"master_seed": 1, "data": {"file": {"path": "x.csv"}}, "fdr": {"q": 1.5}}"#,
            r#"{"master_seed": 1, "data": {"file": {"path": "x.csv"}}, "colour": "red"}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }
}
