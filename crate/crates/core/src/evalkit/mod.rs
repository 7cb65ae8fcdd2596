//! Resampling schemes, selection-quality metrics, SBC and the subsample
//! stability protocol.

mod metrics;
mod resample;
mod sbc;
mod stability;

pub use metrics::{jaccard, selection_metrics, SelectionMetrics};
pub use resample::{
    kfold_accuracy, kfold_eval, loocv, split_eval, stratified_folds, stratified_split, EvalReport, HeldOut, Scheme,
};
pub use sbc::{sbc, sbc_value};
pub use stability::{
    replicate_seeds, stability_study, stratified_subsample, ReplicateOutcome, StabilityConfig, StabilityReport,
};
