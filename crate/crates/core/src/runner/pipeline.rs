use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::chart::emit_importance_chart;
use super::config::{DataSource, ExperimentConfig, FdrScope, PrescreenKind, SchemeKind};
use super::dataset_io::load_dataset;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::evalkit::{
    kfold_eval, loocv, replicate_seeds, selection_metrics, split_eval, stability_study, EvalReport, StabilityConfig,
    StabilityReport,
};
use crate::hypotest::{fdr_select, testwise_scan, AdjustmentMethod};
use crate::learners::{fit, ModelSpec};
use crate::screen::{cut_to, rsquare_rank, GeneRanking};
use crate::simkit::{gen_cohort, label, DiseaseSpec};

/// Ranking entries kept per cell in the bundle.
const RANKING_KEEP: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_name: Option<String>,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Evaluated { report: EvalReport },
    Fdr { method: AdjustmentMethod, q: f64, selected: Vec<String>, fd_rate: Option<f64>, fnd_set: Option<Vec<String>> },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub seed: u64,
    /// Data cell label, e.g. `Disease6 n=102 p=2000`.
    pub dataset: String,
    pub n: usize,
    /// Genes offered to the model or tested.
    pub pool_size: usize,
    pub model: String,
    pub outcome: CellOutcome,
}

impl CellReport {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, CellOutcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub cell: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<String>>,
    pub ranking: GeneRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub cells: Vec<CellReport>,
    pub rankings: Vec<RankingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability_error: Option<String>,
    /// Failed cells, plus one if the stability study failed.
    pub failures: usize,
}

impl ReportBundle {
    /// Pretty JSON with every float rounded to 6 significant digits.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("bundle serializes");
        round_floats(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("bundle.json");
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

pub(crate) fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Seed for a named cell: independent of the cell's position in the grid.
pub(crate) fn cell_seed(master: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

struct DataCell {
    label: String,
    data: std::result::Result<LabeledDataset, String>,
}

fn data_cells(cfg: &ExperimentConfig) -> Result<Vec<DataCell>> {
    match &cfg.data {
        DataSource::Synthetic(s) => {
            let mut cells = Vec::new();
            for &n in &s.n_patients {
                let key = format!("cohort|{n}|{}", s.n_genes);
                let cohort = gen_cohort(n, s.n_genes, &s.params, cell_seed(cfg.master_seed, &key));
                for &d in &s.diseases {
                    let data = match &cohort {
                        Ok(m) => DiseaseSpec::calibrate(d, m).and_then(|spec| label(&spec, m)),
                        Err(e) => Err(Error::Input(e.to_string())),
                    };
                    cells.push(DataCell {
                        label: format!("{d} n={n} p={}", s.n_genes),
                        data: data.map_err(|e| e.to_string()),
                    });
                }
            }
            Ok(cells)
        }
        DataSource::File(f) => {
            let mut data = load_dataset(&f.path)?;
            if let Some(causal) = &f.causal {
                for g in causal {
                    data.matrix.column_by_id(g)?;
                }
                data.truth = Some(causal.clone());
            }
            let name = f.path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(vec![DataCell { label: format!("{name} n={} p={}", data.n(), data.matrix.n_genes()), data: Ok(data) }])
        }
    }
}

enum JobKind<'a> {
    Model(&'a ModelSpec),
    Fdr,
}

struct Job<'a> {
    /// `Err` carries the upstream failure shared by every cell of a data cell.
    input: std::result::Result<(&'a LabeledDataset, &'a [String]), &'a str>,
    dataset: &'a str,
    kind: JobKind<'a>,
}

fn prescreen(cfg: &ExperimentConfig, data: &LabeledDataset, seed: u64) -> Result<Vec<(String, Vec<String>)>> {
    let pre = &cfg.prescreen;
    let admitted: Vec<String> = data.matrix.gene_ids().iter().filter(|g| !pre.exclude.contains(g)).cloned().collect();
    if admitted.is_empty() {
        return Err(Error::Input("every gene is excluded".into()));
    }
    let ranking = match pre.kind {
        PrescreenKind::None => return Ok(vec![("all".into(), admitted)]),
        PrescreenKind::Rsquare => rsquare_rank(&data.with_genes(&admitted)?)?,
        PrescreenKind::ImportanceCut => {
            let model = pre.model.as_ref().ok_or_else(|| Error::Config("importance_cut needs a model".into()))?;
            fit(model, data, &admitted, seed)?.gene_importance()
        }
    };
    Ok(pre.sizes.iter().map(|&k| (k.to_string(), cut_to(&ranking, k))).collect())
}

fn evaluate(
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
    data: &LabeledDataset,
    pool: &[String],
    seed: u64,
) -> Result<EvalReport> {
    let e = &cfg.evaluation;
    let scheme = match e.scheme {
        SchemeKind::Auto if data.n() <= e.auto_loocv_max_n => SchemeKind::Loocv,
        SchemeKind::Auto => SchemeKind::Split,
        s => s,
    };
    match scheme {
        SchemeKind::Loocv | SchemeKind::Auto => loocv(spec, data, pool, seed),
        SchemeKind::Split => split_eval(spec, data, pool, e.train_fraction, seed),
        SchemeKind::Kfold => kfold_eval(spec, data, pool, e.k, seed),
    }
}

fn fdr_cell(cfg: &ExperimentConfig, data: &LabeledDataset, pool: &[String]) -> Result<CellOutcome> {
    let fdr = cfg.fdr.as_ref().expect("fdr job implies fdr config");
    let scan = testwise_scan(&data.with_genes(pool)?)?;
    let selected = fdr_select(&scan, fdr.method, fdr.q)?;
    let (fd_rate, fnd_set) = match data.truth.as_deref() {
        Some(t) if !t.is_empty() => {
            let m = selection_metrics(&selected, t)?;
            (m.fd_rate, Some(m.fnd_set))
        }
        _ => (None, None),
    };
    Ok(CellOutcome::Fdr { method: fdr.method, q: fdr.q, selected, fd_rate, fnd_set })
}

fn fdr_label(cfg: &ExperimentConfig) -> String {
    let f = cfg.fdr.as_ref().expect("fdr config");
    let m = match f.method {
        AdjustmentMethod::Bonferroni => "bonferroni",
        AdjustmentMethod::Bh => "bh",
        AdjustmentMethod::AdaptiveBh => "adaptive_bh",
    };
    format!("fdr({m}, q={})", f.q)
}

/// Runs every cell of the grid without touching the filesystem beyond reading
/// a file data source.
pub fn execute(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let provenance = Provenance {
        config_name: cfg.name.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let cells = data_cells(cfg)?;
    type Pools = std::result::Result<Vec<(String, Vec<String>)>, String>;
    let pools: Vec<Pools> = cells
        .par_iter()
        .map(|c| match &c.data {
            Ok(d) => prescreen(cfg, d, cell_seed(cfg.master_seed, &format!("prescreen|{}", c.label)))
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        })
        .collect();

    let model_keys: Vec<String> =
        cfg.models.iter().map(|m| serde_json::to_string(m).expect("model spec serializes")).collect();
    let mut jobs: Vec<(String, Job)> = Vec::new();
    for (cell, pool_set) in cells.iter().zip(&pools) {
        type Input<'a> = std::result::Result<(&'a LabeledDataset, &'a [String]), &'a str>;
        let entries: Vec<(String, Input)> = match (&cell.data, pool_set) {
            (Ok(d), Ok(ps)) => ps.iter().map(|(label, p)| (label.clone(), Ok((d, p.as_slice())))).collect(),
            (_, Err(e)) | (Err(e), _) => vec![("all".into(), Err(e.as_str()))],
        };
        for (pool_label, input) in &entries {
            for (spec, key) in cfg.models.iter().zip(&model_keys) {
                jobs.push((
                    format!("model|{}|{pool_label}|{key}", cell.label),
                    Job { input: *input, dataset: &cell.label, kind: JobKind::Model(spec) },
                ));
            }
            if cfg.fdr.as_ref().is_some_and(|f| f.scope == FdrScope::Pool) {
                jobs.push((
                    format!("fdr|{}|{pool_label}", cell.label),
                    Job { input: *input, dataset: &cell.label, kind: JobKind::Fdr },
                ));
            }
        }
        if cfg.fdr.as_ref().is_some_and(|f| f.scope == FdrScope::AllGenes) {
            let input = match &cell.data {
                Ok(d) => Ok((d, d.matrix.gene_ids())),
                Err(e) => Err(e.as_str()),
            };
            jobs.push((format!("fdr|{}|all", cell.label), Job { input, dataset: &cell.label, kind: JobKind::Fdr }));
        }
    }

    let results: Vec<(CellReport, Option<RankingRecord>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, (key, job))| {
            let seed = cell_seed(cfg.master_seed, key);
            let model = match job.kind {
                JobKind::Model(spec) => spec.display_name(),
                JobKind::Fdr => fdr_label(cfg),
            };
            let mut ranking = None;
            let outcome = match job.input {
                Err(e) => CellOutcome::Failed { error: e.to_string() },
                Ok((data, pool)) => {
                    let result = match job.kind {
                        JobKind::Model(spec) => evaluate(cfg, spec, data, pool, seed).map(|mut report| {
                            if let Some(mut r) = report.ranking.take() {
                                r.entries.truncate(RANKING_KEEP);
                                ranking = Some(RankingRecord { cell: index, truth: data.truth.clone(), ranking: r });
                            }
                            CellOutcome::Evaluated { report }
                        }),
                        JobKind::Fdr => fdr_cell(cfg, data, pool),
                    };
                    result.unwrap_or_else(|e| CellOutcome::Failed { error: e.to_string() })
                }
            };
            let (n, pool_size) = job.input.map(|(d, p)| (d.n(), p.len())).unwrap_or((0, 0));
            let report = CellReport { index, seed, dataset: job.dataset.to_string(), n, pool_size, model, outcome };
            (report, ranking)
        })
        .collect();

    let mut cells_out = Vec::with_capacity(results.len());
    let mut rankings = Vec::new();
    for (c, r) in results {
        cells_out.push(c);
        rankings.extend(r);
    }
    let mut failures = cells_out.iter().filter(|c| c.failed()).count();

    let (stability, stability_error) = match &cfg.replication {
        None => (None, None),
        Some(_) => match run_stability(cfg) {
            Ok(s) => (Some(s), None),
            Err(e) => {
                failures += 1;
                (None, Some(e.to_string()))
            }
        },
    };
    Ok(ReportBundle { provenance, cells: cells_out, rankings, stability, stability_error, failures })
}

/// [`execute`], then writes `bundle.json` and any requested charts to the
/// configured output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    let bundle = execute(cfg)?;
    bundle.write(&cfg.output_dir)?;
    if let Some(top_k) = cfg.chart_top_k {
        let dir = cfg.output_dir.join("charts");
        for r in &bundle.rankings {
            if r.ranking.is_empty() {
                continue;
            }
            let cell = &bundle.cells[r.cell];
            let slug: String = format!("{}_{}", cell.dataset, cell.model)
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
                .collect();
            let path = dir.join(format!("cell{:03}_{slug}.svg", r.cell));
            emit_importance_chart(&r.ranking, r.truth.as_deref().unwrap_or(&[]), top_k, &path)?;
        }
    }
    Ok(bundle)
}

/// The replication block applied to the first data cell.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let rep = cfg.replication.as_ref().ok_or_else(|| Error::Config("config has no replication block".into()))?;
    let cells = data_cells(cfg)?;
    let first = cells.into_iter().next().ok_or_else(|| Error::Config("no data cell".into()))?;
    let data = first.data.map_err(Error::Input)?;
    let study = StabilityConfig {
        subsample_fraction: rep.subsample_fraction,
        prescreen_k: rep.prescreen_k,
        model: rep.model.clone(),
    };
    let seeds = replicate_seeds(cell_seed(cfg.master_seed, "stability"), rep.n_replicates);
    stability_study(&data, &study, &seeds)
}
