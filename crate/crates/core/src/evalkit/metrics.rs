use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::sorted_natural;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// Share of selected genes that are not causal; `None` when nothing was selected.
    pub fd_rate: Option<f64>,
    /// Causal genes that were not selected.
    pub fnd_set: Vec<String>,
}

pub fn selection_metrics<S: AsRef<str>, T: AsRef<str>>(selected: &[S], truth: &[T]) -> Result<SelectionMetrics> {
    if truth.is_empty() {
        return Err(Error::Input("truth set is empty".into()));
    }
    let sel: BTreeSet<&str> = selected.iter().map(AsRef::as_ref).collect();
    let tru: BTreeSet<&str> = truth.iter().map(AsRef::as_ref).collect();
    let fd_rate = (!sel.is_empty()).then(|| sel.difference(&tru).count() as f64 / sel.len() as f64);
    let fnd_set = sorted_natural(tru.difference(&sel).map(|s| s.to_string()).collect());
    Ok(SelectionMetrics { fd_rate, fnd_set })
}

/// |A ∩ B| / |A ∪ B|, with two empty sets counted as identical.
pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
