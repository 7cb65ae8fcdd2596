//! Experiment configuration, dataset files, grid orchestration and report output.

mod chart;
mod config;
mod dataset_io;
mod pipeline;
mod report;

pub use chart::{emit_importance_chart, ChartFiles};
pub use config::{
    DataSource, EvaluationConfig, ExperimentConfig, FdrConfig, FdrScope, FileSource, PrescreenConfig, PrescreenKind,
    ReplicationConfig, SchemeKind, SyntheticSource,
};
pub use dataset_io::{load_dataset, write_dataset};
pub use pipeline::{execute, run, run_stability, CellOutcome, CellReport, Provenance, RankingRecord, ReportBundle};
pub use report::{emit_report, format_number, render_csv, render_markdown, ReportFormat};
