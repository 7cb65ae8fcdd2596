use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pipeline::{round_sig, CellOutcome, CellReport, ReportBundle};
use crate::error::{Error, Result};

/// Genes listed per cell before the rest are summarised as a count.
const LIST_LIMIT: usize = 12;

const COLUMNS: [&str; 11] = [
    "dataset",
    "model",
    "pool_size",
    "n",
    "n_selected",
    "selected_genes",
    "error",
    "accuracy",
    "fd_rate",
    "fnd_set",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// A float rounded to 6 significant digits, printed in its shortest form.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    format!("{}", round_sig(x))
}

fn gene_list(genes: &[String]) -> String {
    if genes.is_empty() {
        return "none".into();
    }
    let shown = genes[..genes.len().min(LIST_LIMIT)].join(" ");
    if genes.len() > LIST_LIMIT {
        format!("{shown} +{} more", genes.len() - LIST_LIMIT)
    } else {
        shown
    }
}

fn opt_number(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_else(|| "NA".into())
}

fn row(cell: &CellReport) -> Vec<String> {
    let mut r = vec![cell.dataset.clone(), cell.model.clone(), cell.pool_size.to_string(), cell.n.to_string()];
    let na = || "NA".to_string();
    match &cell.outcome {
        CellOutcome::Evaluated { report } => r.extend([
            report.selected_genes.len().to_string(),
            gene_list(&report.selected_genes),
            format_number(report.error_rate),
            format_number(report.accuracy),
            opt_number(report.fd_rate),
            report.fnd_set.as_deref().map(gene_list).unwrap_or_else(na),
            "ok".into(),
        ]),
        CellOutcome::Fdr { selected, fd_rate, fnd_set, .. } => r.extend([
            selected.len().to_string(),
            gene_list(selected),
            na(),
            na(),
            opt_number(*fd_rate),
            fnd_set.as_deref().map(gene_list).unwrap_or_else(na),
            "ok".into(),
        ]),
        CellOutcome::Failed { error } => {
            r.extend([na(), na(), na(), na(), na(), na(), format!("failed: {error}")]);
        }
    }
    r
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(bundle: &ReportBundle) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for cell in &bundle.cells {
        let fields: Vec<String> = row(cell).iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn md_row(fields: &[String]) -> String {
    let escaped: Vec<String> = fields.iter().map(|f| f.replace('|', "\\|").replace('\n', " ")).collect();
    format!("| {} |\n", escaped.join(" | "))
}

fn md_header() -> String {
    let names: Vec<String> = COLUMNS[1..].iter().map(|s| s.to_string()).collect();
    let mut out = md_row(&names);
    out.push_str(&format!("|{}\n", "---|".repeat(names.len())));
    out
}

/// One table per data cell, in first-appearance order. An empty bundle gives
/// a lone header.
pub fn render_markdown(bundle: &ReportBundle) -> String {
    if bundle.cells.is_empty() {
        return md_header();
    }
    let mut datasets: Vec<&str> = Vec::new();
    for c in &bundle.cells {
        if !datasets.contains(&c.dataset.as_str()) {
            datasets.push(&c.dataset);
        }
    }
    let mut out = String::new();
    for (i, ds) in datasets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("## {ds}\n\n"));
        out.push_str(&md_header());
        for c in bundle.cells.iter().filter(|c| c.dataset == *ds) {
            out.push_str(&md_row(&row(c)[1..]));
        }
    }
    out
}

/// Writes `report.csv` or `report.md` into `dir`.
pub fn emit_report(bundle: &ReportBundle, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (name, body) = match format {
        ReportFormat::Csv => ("report.csv", render_csv(bundle)),
        ReportFormat::Markdown => ("report.md", render_markdown(bundle)),
    };
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_number(22.0 / 62.0), "0.354839");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(123456789.0), "123457000");
        assert_eq!(format_number(f64::NAN), "NA");
    }

    #[test]
    fn long_lists_are_summarised() {
        let genes: Vec<String> = (1..=15).map(|i| format!("X{i}")).collect();
        assert!(gene_list(&genes).ends_with("X12 +3 more"));
        assert_eq!(gene_list(&[]), "none");
    }

    #[test]
    fn csv_quotes_when_needed() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
