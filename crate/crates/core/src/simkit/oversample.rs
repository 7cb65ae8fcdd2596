use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{sample_indices, stream_rng};

/// Keeps every minority-class row and an equally sized uniform sample of the
/// majority class, drawn without replacement. Rows keep their original order.
pub fn oversample(data: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Class(format!("oversampling needs both classes, have {n0} normal and {n1} diseased")));
    }
    let minority: u8 = if n1 <= n0 { 1 } else { 0 };
    let (minor_rows, major_rows): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| data.labels[i] == minority);
    let mut rng = stream_rng(seed, 0);
    let picked = sample_indices(&mut rng, major_rows.len(), minor_rows.len());
    let mut rows: Vec<usize> = minor_rows;
    rows.extend(picked.into_iter().map(|k| major_rows[k]));
    rows.sort_unstable();
    Ok(data.subset(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExpressionMatrix;

    fn dataset(labels: Vec<u8>) -> LabeledDataset {
        let col: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        let m = ExpressionMatrix::from_columns(vec!["X1".into()], vec![col]).unwrap();
        LabeledDataset::new(m, labels, None).unwrap()
    }

    #[test]
    fn rare_disease_cohort() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 100 < 3)).collect();
        let out = oversample(&dataset(labels), 5).unwrap();
        assert_eq!(out.n(), 60);
        assert_eq!(out.class_counts(), (30, 30));
    }

    #[test]
    fn balanced_is_noop() {
        let labels: Vec<u8> = (0..62).map(|i| (i % 2) as u8).collect();
        let d = dataset(labels);
        assert_eq!(oversample(&d, 1).unwrap(), d);
    }

    #[test]
    fn colon_shape() {
        let labels: Vec<u8> = (0..62).map(|i| u8::from(i < 40)).collect();
        let out = oversample(&dataset(labels), 3).unwrap();
        assert_eq!(out.class_counts(), (22, 22));
    }

    #[test]
    fn one_class_rejected() {
        assert!(oversample(&dataset(vec![1, 1, 1]), 0).is_err());
    }
}
