use std::fs;

use genesel_core::data::{ExpressionMatrix, LabeledDataset};
use genesel_core::runner::{
    emit_importance_chart, execute, load_dataset, render_csv, render_markdown, run, write_dataset, CellOutcome,
    ExperimentConfig,
};
use genesel_core::screen::{GeneRanking, ScoreKind};

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(body).unwrap()
}

const GRID: &str = r#"{
    "master_seed": 11,
    "data": {"synthetic": {"diseases": [6, 7], "n_patients": [40], "n_genes": 60}},
    "prescreen": {"kind": "rsquare", "sizes": [10, 20]},
    "models": [{"family": "tree"}, {"family": "boosting", "n_trees": 20}]
}"#;

/// Splits one CSV record, honouring double-quoted fields.
fn csv_fields(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                chars.next();
                out.last_mut().unwrap().push('"');
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            _ => out.last_mut().unwrap().push(c),
        }
    }
    out
}

#[test]
fn no_models_gives_empty_bundle() {
    let cfg =
        config(r#"{"master_seed": 1, "data": {"synthetic": {"diseases": [1], "n_patients": [30], "n_genes": 20}}}"#);
    let bundle = execute(&cfg).unwrap();
    assert!(bundle.cells.is_empty());
    assert_eq!(bundle.failures, 0);
    assert_eq!(render_csv(&bundle).lines().count(), 1);
    assert_eq!(render_markdown(&bundle).lines().count(), 2);
}

#[test]
fn grid_has_one_cell_per_combination() {
    let bundle = execute(&config(GRID)).unwrap();
    // 2 diseases x 1 cohort size x 2 pools x 2 models
    assert_eq!(bundle.cells.len(), 8);
    assert_eq!(bundle.failures, 0);
    let mut datasets: Vec<&str> = bundle.cells.iter().map(|c| c.dataset.as_str()).collect();
    datasets.dedup();
    assert_eq!(datasets.len(), 2);
    for c in &bundle.cells {
        assert!(matches!(c.outcome, CellOutcome::Evaluated { .. }));
        assert!(c.pool_size == 10 || c.pool_size == 20);
    }
}

#[test]
fn provenance_hash_follows_config() {
    let a = execute(&config(GRID)).unwrap();
    let b = execute(&config(&GRID.replace("\"master_seed\": 11", "\"master_seed\": 12"))).unwrap();
    assert_ne!(a.provenance.config_hash, b.provenance.config_hash);
    assert_eq!(a.provenance.config_hash, config(GRID).hash());
}

#[test]
fn csv_and_markdown_carry_the_same_numbers() {
    let bundle = execute(&config(GRID)).unwrap();
    let csv = render_csv(&bundle);
    let md = render_markdown(&bundle);
    let csv_errors: Vec<String> = csv.lines().skip(1).map(|l| csv_fields(l)[6].clone()).collect();
    let md_errors: Vec<String> = md
        .lines()
        .filter(|l| l.starts_with("| ") && !l.starts_with("| model"))
        .map(|l| l.split(" | ").nth(5).unwrap().trim().to_string())
        .collect();
    assert_eq!(csv_errors.len(), 8);
    assert_eq!(csv_errors, md_errors);
    for (text, cell) in csv_errors.iter().zip(&bundle.cells) {
        let CellOutcome::Evaluated { report } = &cell.outcome else { panic!("cell did not evaluate") };
        let parsed: f64 = text.parse().unwrap();
        assert!((parsed - report.error_rate).abs() <= 1e-5 * report.error_rate.max(1e-300));
    }
}

#[test]
fn run_writes_bundle_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(GRID);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.chart_top_k = Some(5);
    let bundle = run(&cfg).unwrap();
    let reloaded = genesel_core::runner::ReportBundle::load(&dir.path().join("bundle.json")).unwrap();
    assert_eq!(reloaded.cells.len(), bundle.cells.len());
    let svgs = fs::read_dir(dir.path().join("charts"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, bundle.cells.len());
}

fn ranking(n: usize) -> GeneRanking {
    let ids: Vec<String> = (1..=n).map(|j| format!("X{j}")).collect();
    let scores: Vec<f64> = (0..n).map(|j| (n - j) as f64).collect();
    GeneRanking::from_scores(&ids, &scores, ScoreKind::Importance)
}

#[test]
fn chart_saturates_at_ranking_length() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_importance_chart(&ranking(4), &["X2".to_string()], 50, &dir.path().join("c.svg")).unwrap();
    let csv = fs::read_to_string(&files.csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("X2,3,true"));
    let svg = fs::read_to_string(&files.svg).unwrap();
    assert_eq!(svg.matches("#c0392b").count(), 2, "legend swatch plus one causal bar");
}

#[test]
fn chart_with_one_bar() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_importance_chart(&ranking(1), &[], 10, &dir.path().join("one.svg")).unwrap();
    assert_eq!(fs::read_to_string(files.csv).unwrap(), "gene_id,score,is_causal\nX1,1,false\n");
    assert!(emit_importance_chart(&ranking(0), &[], 10, &dir.path().join("none.svg")).is_err());
}

#[test]
fn dataset_file_round_trip_and_file_source() {
    let dir = tempfile::tempdir().unwrap();
    let m = ExpressionMatrix::from_columns(
        vec!["G1".into(), "G2".into()],
        vec![
            (0..20).map(|i| i as f64 * 1.5 + if i >= 10 { 100.0 } else { 0.0 }).collect(),
            (0..20).map(|i| ((i * 7) % 11) as f64 + 0.25).collect(),
        ],
    )
    .unwrap();
    let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let data = LabeledDataset::new(m, labels, Some(vec!["G1".into()])).unwrap();
    let path = dir.path().join("nested/cohort.csv");
    write_dataset(&path, &data).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);

    let cfg = config(&format!(
        r#"{{"master_seed": 3, "data": {{"file": {{"path": {:?}}}}}, "models": [{{"family": "tree"}}]}}"#,
        path.to_str().unwrap()
    ));
    let bundle = execute(&cfg).unwrap();
    assert_eq!(bundle.cells.len(), 1);
    let CellOutcome::Evaluated { report } = &bundle.cells[0].outcome else { panic!("tree cell failed") };
    assert_eq!(report.error_rate, 0.0);
    assert_eq!(report.fd_rate, Some(0.0));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 8);
}
