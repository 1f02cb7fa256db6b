use proptest::prelude::*;
use snp_core::axis::{interpolation_weights, synthesize_axis_decoder, synthesize_axis_encoder};
use snp_core::harness::{confidence_interval, kfold_splits};
use snp_core::logistic::LogisticOptions;
use snp_core::matrix::{dot, norm};
use snp_core::metrics::{kl_retrieval, max_skew, retrieve_topn, roc_auc};
use snp_core::project::{rank1_from_vector, subspace_projector};
use snp_core::sae::{FeatureIndexSet, SaeParams};
use snp_core::select::{top_k, wasserstein_1d, FeatureRanking};
use snp_core::Matrix;

fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..max)
}

fn nonzero_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n).prop_filter("nonzero", |v| norm(v) > 1e-3)
}

fn binary_labels(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1))
}

proptest! {
    #[test]
    fn wasserstein_is_a_symmetric_nonnegative_distance(a in sample(20), b in sample(20), c in sample(20)) {
        let ab = wasserstein_1d(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_1d(&b, &a).unwrap()).abs() <= 1e-9 * (1.0 + ab));
        prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let triangle = wasserstein_1d(&a, &c).unwrap() + wasserstein_1d(&c, &b).unwrap();
        prop_assert!(ab <= triangle + 1e-9 * (1.0 + triangle));
    }

    #[test]
    fn wasserstein_tracks_shift_and_scale(a in sample(20), shift in -50.0f64..50.0, scale in -5.0f64..5.0) {
        let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let w = wasserstein_1d(&a, &shifted).unwrap();
        prop_assert!((w - shift.abs()).abs() < 1e-9 * (1.0 + shift.abs() + 100.0));
        let b: Vec<f64> = a.iter().rev().map(|x| x * 0.5 - 1.0).collect();
        let sa: Vec<f64> = a.iter().map(|x| x * scale).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * scale).collect();
        let base = wasserstein_1d(&a, &b).unwrap();
        prop_assert!((wasserstein_1d(&sa, &sb).unwrap() - scale.abs() * base).abs() < 1e-8 * (1.0 + base));
    }

    #[test]
    fn rank1_projection_is_idempotent_and_orthogonal(v in nonzero_vector(6), x in prop::collection::vec(-10.0f64..10.0, 6)) {
        let p = rank1_from_vector(&v, "t").unwrap();
        let once = p.apply_vector(&x).unwrap();
        let twice = p.apply_vector(&once).unwrap();
        let scale = 1.0 + norm(&x);
        prop_assert!(dot(&once, &v).abs() / norm(&v) < 1e-12 * scale);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12 * scale);
        }
        prop_assert!(norm(&once) <= norm(&x) + 1e-12 * scale);
        let neg: Vec<f64> = v.iter().map(|a| -a).collect();
        let q = rank1_from_vector(&neg, "t").unwrap();
        prop_assert!(p.dense().max_abs_diff(&q.dense()) < 1e-12);
    }

    #[test]
    fn subspace_projection_removes_every_column(cols in prop::collection::vec(nonzero_vector(5), 1..4)) {
        let a = Matrix::from_columns(&cols).unwrap();
        let p = subspace_projector(&a, "t").unwrap();
        prop_assert!(p.rank() <= cols.len());
        for c in &cols {
            prop_assert!(norm(&p.apply_vector(c).unwrap()) < 1e-9 * (1.0 + norm(c)));
        }
        let d = p.dense();
        prop_assert!(d.max_abs_diff(&d.transpose()) < 1e-12);
        prop_assert!(d.matmul(&d).unwrap().max_abs_diff(&d) < 1e-10);
    }

    #[test]
    fn auc_is_invariant_to_monotone_maps(
        (scores, labels) in (2usize..40).prop_flat_map(|n| (prop::collection::vec(-5.0f64..5.0, n), binary_labels(n)))
    ) {
        let base = roc_auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let mapped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
        prop_assert!((roc_auc(&mapped, &labels).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&flipped, &labels).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn retrieval_ignores_positive_row_scaling(
        rows in prop::collection::vec(nonzero_vector(4), 3..15),
        factors in prop::collection::vec(0.1f64..10.0, 15),
        q in nonzero_vector(4),
        n in 1usize..3,
    ) {
        let m = Matrix::from_rows(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().zip(&factors).map(|(r, f)| r.iter().map(|v| v * f).collect()).collect();
        let ids: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        let a = retrieve_topn("q", &q, &m, &ids, n).unwrap();
        let b = retrieve_topn("q", &q, &Matrix::from_rows(&scaled).unwrap(), &ids, n).unwrap();
        for (x, y) in a.similarities.iter().zip(&b.similarities) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!(a.similarities.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn kl_and_skew_are_nonnegative(r in prop::collection::vec(0u8..3, 1..30), d in prop::collection::vec(0u8..3, 1..30)) {
        prop_assert!(kl_retrieval(&r, &d).unwrap() >= 0.0);
        prop_assert!(max_skew(&r, &d).unwrap() >= 0.0);
        prop_assert!(kl_retrieval(&d, &d).unwrap() < 1e-12);
        prop_assert!(max_skew(&d, &d).unwrap() < 1e-12);
    }

    #[test]
    fn confidence_interval_brackets_the_mean(values in prop::collection::vec(-10.0f64..10.0, 2..20)) {
        let (mean, half) = confidence_interval(&values).unwrap();
        prop_assert!(half >= 0.0);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
        let constant = vec![values[0]; values.len()];
        prop_assert!(confidence_interval(&constant).unwrap().1 < 1e-12);
    }

    #[test]
    fn ranking_order_is_descending_with_index_ties(scores in prop::collection::vec(0u8..5, 1..30), k in 1usize..30) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let r = FeatureRanking::from_scores(scores.clone()).unwrap();
        for w in r.order().windows(2) {
            let (a, b) = (w[0], w[1]);
            prop_assert!(scores[a] > scores[b] || (scores[a] == scores[b] && a < b));
        }
        let k = k.min(scores.len());
        let s = top_k(&r, k).unwrap();
        prop_assert_eq!(s.as_slice(), &r.order()[..k]);
    }

    #[test]
    fn folds_partition_and_repeat(n in 4usize..200, folds in 1usize..6, seed in any::<u64>()) {
        let a = kfold_splits(n, folds, 0.5, seed).unwrap();
        prop_assert_eq!(&a, &kfold_splits(n, folds, 0.5, seed).unwrap());
        for s in &a {
            let mut all: Vec<usize> = s.reference.iter().chain(&s.eval).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(s.reference.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn axis_is_linear_in_weights(w in prop::collection::vec(-3.0f64..3.0, 3), c in 0.1f64..4.0) {
        prop_assume!(norm(&w) > 1e-3);
        let dict = Matrix::from_rows(&[
            [1.0, 0.0, 0.0, 0.5],
            [0.0, 1.0, 0.0, 0.5],
            [0.0, 0.0, 1.0, -0.5],
            [0.2, 0.2, 0.2, 0.2],
        ]).unwrap();
        let sae = SaeParams::tied(dict).unwrap();
        let s = FeatureIndexSet::new(vec![0, 2, 3], 4).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| -c * x).collect();
        for synth in [synthesize_axis_encoder, synthesize_axis_decoder] {
            let a = synth(&sae, &s, &w).unwrap();
            let b = synth(&sae, &s, &scaled).unwrap();
            for (x, y) in a.v().iter().zip(b.v()) {
                prop_assert!((y + c * x).abs() < 1e-12 * (1.0 + x.abs() * c));
            }
        }
    }
}

#[test]
fn interpolation_weights_flip_with_the_attribute() {
    let z = Matrix::from_rows(&[
        [2.0, 0.1],
        [1.5, -0.3],
        [1.8, 0.4],
        [-1.0, 0.2],
        [-1.2, -0.1],
        [-0.7, 0.0],
    ])
    .unwrap();
    let attrs = [1u8, 1, 1, 0, 0, 0];
    let flipped: Vec<u8> = attrs.iter().map(|a| 1 - a).collect();
    let s = FeatureIndexSet::new(vec![0, 1], 2).unwrap();
    let opts = LogisticOptions::default();
    let w = interpolation_weights(&z, &s, &attrs, &opts).unwrap();
    let v = interpolation_weights(&z, &s, &flipped, &opts).unwrap();
    assert!(w[0] > 0.0);
    for (a, b) in w.iter().zip(&v) {
        assert!((a + b).abs() < 1e-9);
    }
}
