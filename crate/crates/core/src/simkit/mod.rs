//! Synthetic cohorts: correlated causal genes plus uniform noise genes, labeled
//! by closed-form disease rules.

mod cohort;
mod disease;
mod oversample;

pub use cohort::{gen_cohort, CorrelationParams, RescaleTarget, NOISE_HIGH, NOISE_LOW};
pub use disease::{balanced_cutoff, label, simulate, DiseaseId, DiseaseSpec, Threshold};
pub use oversample::oversample;
