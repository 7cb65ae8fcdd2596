//! Per-gene Welch tests and multiplicity adjustment.

mod adjust;
mod tdist;
mod welch;

pub use adjust::{adjust, fdr_select, AdjustmentMethod, AdjustmentResult};
pub use tdist::{ln_gamma, regularized_incomplete_beta, t_two_sided_p};
pub use welch::{testwise_scan, welch_t, TestResult};
