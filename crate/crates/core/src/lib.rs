//! Synthetic gene-expression benchmarks for comparing gene selection methods:
//! cohort simulation, multiple testing, prescreening, classifiers, resampled
//! evaluation and a seeded experiment runner.

pub mod data;
pub mod error;
pub mod evalkit;
pub mod hypotest;
pub mod learners;
pub mod rng;
pub mod runner;
pub mod screen;
pub mod simkit;

pub use data::{ExpressionMatrix, LabeledDataset, Standardizer};
pub use error::{Error, ParseErrorKind, Result};
pub use evalkit::{EvalReport, Scheme, StabilityReport};
pub use learners::{fit, Family, FittedModel, ModelSpec, SelectionRule};
pub use screen::{GeneRanking, ScoreKind};
pub use simkit::{simulate, CorrelationParams, DiseaseId};
