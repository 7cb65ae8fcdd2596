use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use genesel_core::runner::{self, emit_report, ExperimentConfig, ReportBundle, ReportFormat};
use genesel_core::simkit::{simulate, CorrelationParams, DiseaseId};

#[derive(Parser)]
#[command(name = "genesel", version, about = "Seeded gene-selection benchmark experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled cohort to a CSV file.
    Simulate {
        /// Disease number: 1-11 or 101-103.
        #[arg(long)]
        disease: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        /// Keep X2 and X3 on their raw scale instead of rescaling them.
        #[arg(long)]
        unscaled: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute an experiment config and write bundle.json plus a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Run only the config's replication block and print the stability report.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a report from a saved bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        /// Defaults to the bundle's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

/// Ok(true) when some cells failed but output was still written.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Simulate { disease, n, p, unscaled, seed, out } => {
            let disease = DiseaseId::try_from(disease)?;
            let params = if unscaled { CorrelationParams::unscaled() } else { CorrelationParams::default() };
            let data = simulate(disease, n, p, &params, seed)?;
            runner::write_dataset(&out, &data).with_context(|| format!("writing {}", out.display()))?;
            let (n0, n1) = data.class_counts();
            eprintln!("wrote {} ({n0} controls, {n1} cases)", out.display());
            Ok(false)
        }
        Command::Run { config, seed, out, format } => {
            let cfg = load_config(&config, seed, out)?;
            let bundle = runner::run(&cfg)?;
            let path = emit_report(&bundle, format.into(), &cfg.output_dir)?;
            eprintln!("wrote {} ({} cells, {} failed)", path.display(), bundle.cells.len(), bundle.failures);
            Ok(bundle.failures > 0)
        }
        Command::Stability { config, seed, out } => {
            let cfg = load_config(&config, seed, out)?;
            let report = runner::run_stability(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("stability.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            for (i, r) in report.replicates.iter().enumerate() {
                match (&r.accuracy, &r.error) {
                    (Some(acc), _) => println!("replicate {i}: accuracy {acc:.4}, {} genes", r.selected.len()),
                    (_, Some(e)) => println!("replicate {i}: failed: {e}"),
                    _ => {}
                }
            }
            if let Some(j) = report.mean_jaccard {
                println!("mean pairwise jaccard {j:.4}");
            }
            eprintln!("wrote {}", path.display());
            Ok(!report.warnings.is_empty())
        }
        Command::Report { bundle, format, out } => {
            let b = ReportBundle::load(&bundle).with_context(|| format!("reading {}", bundle.display()))?;
            let dir = out.unwrap_or_else(|| bundle.parent().map(Path::to_path_buf).unwrap_or_default());
            let path = emit_report(&b, format.into(), &dir)?;
            eprintln!("wrote {}", path.display());
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
