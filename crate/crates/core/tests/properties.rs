use genesel_core::data::{ExpressionMatrix, LabeledDataset};
use genesel_core::hypotest::{adjust, welch_t, AdjustmentMethod};
use genesel_core::learners::{fit, Family, ModelSpec, TreeParams};
use genesel_core::screen::{cut_to, rsquare_rank, GeneRanking, ScoreKind};
use genesel_core::simkit::oversample;
use proptest::prelude::*;

fn pvalues() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..60)
}

fn dataset(cols: Vec<Vec<f64>>, labels: Vec<u8>) -> LabeledDataset {
    let ids: Vec<String> = (1..=cols.len()).map(|j| format!("X{j}")).collect();
    LabeledDataset::new(ExpressionMatrix::from_columns(ids, cols).unwrap(), labels, None).unwrap()
}

/// Columns of length `n` plus labels with at least two rows of each class.
fn labeled(genes: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8usize..30).prop_flat_map(move |n| {
        (prop::collection::vec(prop::collection::vec(0.0..10.0f64, n), genes), prop::collection::vec(0u8..=1, n))
            .prop_map(|(cols, mut labels)| {
                labels[0] = 0;
                labels[1] = 0;
                labels[2] = 1;
                labels[3] = 1;
                (cols, labels)
            })
    })
}

proptest! {
    #[test]
    fn bh_rejections_grow_with_q(p in pvalues(), q1 in 0.001..0.5f64, dq in 0.0..0.5f64) {
        let lo = adjust(&p, AdjustmentMethod::Bh, q1).unwrap().rejected;
        let hi = adjust(&p, AdjustmentMethod::Bh, q1 + dq).unwrap().rejected;
        prop_assert!(lo.iter().all(|i| hi.contains(i)));
    }

    #[test]
    fn bh_commutes_with_permutation(p in pvalues(), q in 0.01..0.3f64, rot in 0usize..60) {
        let m = p.len();
        let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let base = adjust(&p, AdjustmentMethod::Bh, q).unwrap().rejected;
        let mut mapped: Vec<usize> = adjust(&permuted, AdjustmentMethod::Bh, q)
            .unwrap()
            .rejected
            .into_iter()
            .map(|k| perm[k])
            .collect();
        mapped.sort_unstable();
        prop_assert_eq!(base, mapped);
    }

    #[test]
    fn adaptive_rejects_at_least_bh(p in pvalues(), q in 0.01..0.3f64) {
        let bh = adjust(&p, AdjustmentMethod::Bh, q).unwrap().rejected;
        let ad = adjust(&p, AdjustmentMethod::AdaptiveBh, q).unwrap().rejected;
        prop_assert!(bh.iter().all(|i| ad.contains(i)));
    }

    #[test]
    fn adjusted_p_bounded(p in pvalues(), q in 0.01..0.3f64) {
        let r = adjust(&p, AdjustmentMethod::Bh, q).unwrap();
        for (a, raw) in r.adjusted_p.iter().zip(&p) {
            prop_assert!(*a >= *raw - 1e-12 && *a <= 1.0);
        }
    }

    #[test]
    fn welch_swap_negates_t(
        a in prop::collection::vec(-10.0..10.0f64, 2..20),
        b in prop::collection::vec(-10.0..10.0f64, 2..20),
    ) {
        prop_assume!(a.windows(2).any(|w| w[0] != w[1]) || b.windows(2).any(|w| w[0] != w[1]));
        let ab = welch_t(&a, &b).unwrap();
        let ba = welch_t(&b, &a).unwrap();
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-9 * (1.0 + ab.t_statistic.abs()));
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert!((ab.df - ba.df).abs() <= 1e-9 * ab.df);
    }

    #[test]
    fn cut_to_is_nested(scores in prop::collection::vec(0.0..1.0f64, 1..40), k1 in 0usize..45, dk in 0usize..10) {
        let ids: Vec<String> = (0..scores.len()).map(|j| format!("G{j}")).collect();
        let r = GeneRanking::from_scores(&ids, &scores, ScoreKind::Rsquare);
        let small = cut_to(&r, k1);
        let big = cut_to(&r, k1 + dk);
        prop_assert_eq!(small.len(), k1.min(scores.len()));
        prop_assert_eq!(&big[..small.len()], &small[..]);
    }

    #[test]
    fn rsquare_invariant_under_positive_affine_maps(
        (cols, labels) in labeled(4),
        scale in prop::collection::vec(0.1..10.0f64, 4),
        shift in prop::collection::vec(0.0..100.0f64, 4),
    ) {
        prop_assume!(cols.iter().all(|c| c.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-3)));
        let moved: Vec<Vec<f64>> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|x| scale[j] * x + shift[j]).collect())
            .collect();
        let before = rsquare_rank(&dataset(cols, labels.clone())).unwrap();
        let after = rsquare_rank(&dataset(moved, labels)).unwrap();
        for e in &before.entries {
            let s = after.score_of(&e.gene_id).unwrap();
            prop_assert!((s - e.score).abs() <= 1e-9, "{} vs {}", s, e.score);
        }
    }

    #[test]
    fn oversample_balances_and_keeps_minority((cols, labels) in labeled(2), seed in any::<u64>()) {
        let d = dataset(cols, labels);
        let (n0, n1) = d.class_counts();
        let out = oversample(&d, seed).unwrap();
        let (o0, o1) = out.class_counts();
        prop_assert_eq!(o0, n0.min(n1));
        prop_assert_eq!(o1, n0.min(n1));
        let minority = u8::from(n1 <= n0);
        let kept: Vec<Vec<f64>> = (0..out.n()).filter(|&i| out.labels[i] == minority).map(|i| out.matrix.row(i)).collect();
        let orig: Vec<Vec<f64>> = (0..d.n()).filter(|&i| d.labels[i] == minority).map(|i| d.matrix.row(i)).collect();
        prop_assert_eq!(kept, orig);
    }

    #[test]
    fn tree_ignores_monotone_transforms((cols, labels) in labeled(3)) {
        let spec = ModelSpec::new(Family::Tree(TreeParams { max_depth: 3, min_leaf: 2 }));
        let genes = vec!["X1".to_string(), "X2".to_string(), "X3".to_string()];
        let warped: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|x| x.sqrt() + 3.0 * x).collect()).collect();
        let a = dataset(cols, labels.clone());
        let b = dataset(warped, labels);
        let pa = fit(&spec, &a, &genes, 0).unwrap().predict(&a.matrix).unwrap();
        let pb = fit(&spec, &b, &genes, 0).unwrap().predict(&b.matrix).unwrap();
        prop_assert_eq!(pa.probabilities, pb.probabilities);
    }
}
