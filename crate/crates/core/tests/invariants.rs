use std::collections::BTreeSet;

use acctrisk::boost::{fit_boost, BoostParams, BoostedModel};
use acctrisk::cart::{gini_impurity, fit_tree, TreeParams};
use acctrisk::ensemble::{fit_forest, predict_forest, Forest, ForestParams};
use acctrisk::eval::{auc, confusion, roc_curve, stratified_folds, trapezoid_area};
use acctrisk::features::{compute_def1, FeatureMatrix};
use acctrisk::glm::{fit_logit, mid_ranks, spearman};
use acctrisk::panel::split_random;
use acctrisk::synthgen::{generate_panel, SynthConfig};
use proptest::prelude::*;

fn small_panel(seed: u64) -> acctrisk::panel::PanelDataset {
    let cfg = SynthConfig {
        n_firms: 600,
        seed,
        ..SynthConfig::reference()
    };
    generate_panel(&cfg).unwrap().0
}

fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(-50i32..50, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
    .prop_filter("both classes", |(_, y)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_is_rank_invariant((s, y) in labelled()) {
        let a = auc(&s, &y).unwrap();
        let t: Vec<f64> = s.iter().map(|v| (v / 10.0).exp()).collect();
        prop_assert!((a - auc(&t, &y).unwrap()).abs() < 1e-12);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((a + auc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((a - trapezoid_area(&roc_curve(&s, &y).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_partition_rows((s, y) in labelled(), th in -50.0f64..50.0) {
        let c = confusion(&s, &y, th).unwrap();
        prop_assert_eq!(c.true_negative + c.false_positive + c.false_negative + c.true_positive, y.len());
        prop_assert!((0.0..=1.0).contains(&c.class0_error));
        prop_assert!((0.0..=1.0).contains(&c.class1_error));
    }

    #[test]
    fn mid_ranks_sum_and_spearman_bounds((s, _) in labelled()) {
        let r = mid_ranks(&s);
        let n = s.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        let t: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        if let Ok(rho) = spearman(&s, &t) {
            prop_assert!((rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gini_lies_in_unit_half(n0 in 0.0f64..1e4, n1 in 0.0f64..1e4) {
        prop_assume!(n0 + n1 > 0.0);
        let g = gini_impurity(n0, n1).unwrap();
        prop_assert!((0.0..=0.5 + 1e-15).contains(&g));
    }

    #[test]
    fn folds_are_stratified(n in 20usize..200, k in 2usize..6, seed in 0u64..1000) {
        let y: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&y, k, seed).unwrap();
        prop_assert_eq!(f.len(), n);
        for fold in 0..k {
            let pos = (0..n).filter(|&i| f[i] == fold && y[i]).count();
            let total_pos = y.iter().filter(|&&b| b).count();
            prop_assert!((pos as f64 - total_pos as f64 / k as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn tree_probabilities_are_valid((s, y) in labelled()) {
        let x = FeatureMatrix::from_named_columns(&["a"], vec![s]).unwrap();
        let w = vec![1.0; y.len()];
        let t = fit_tree(&x, &y, &w, &TreeParams::default()).unwrap();
        for p in t.predict(&x).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn split_partitions_accounts_and_keeps_default_rate() {
    let panel = small_panel(3);
    let (tr, te) = split_random(&panel, 0.3, 1).unwrap();
    assert_eq!(tr.labels().len() + te.labels().len(), panel.labels().len());
    let a: BTreeSet<_> = tr.labels().iter().map(|l| (&l.account_id, l.snapshot_month)).collect();
    assert!(te.labels().iter().all(|l| !a.contains(&(&l.account_id, l.snapshot_month))));
    assert!((tr.default_rate() - te.default_rate()).abs() < 0.02);
}

#[test]
fn model_json_round_trips_preserve_predictions() {
    let panel = small_panel(4);
    let (x, _, _) = compute_def1(&panel).unwrap();
    let y: Vec<bool> = panel.labels().iter().map(|l| l.default).collect();

    let f = fit_forest(&x, &y, &ForestParams { n_trees: 20, ..ForestParams::balanced() }).unwrap();
    let g = Forest::from_json(&f.to_json().unwrap()).unwrap();
    assert_eq!(predict_forest(&f, &x).unwrap(), predict_forest(&g, &x).unwrap());

    let b = fit_boost(&x, &y, &BoostParams { n_rounds: 50, ..BoostParams::default() }).unwrap();
    let c = BoostedModel::from_json(&b.to_json().unwrap()).unwrap();
    assert_eq!(b.predict(&x).unwrap(), c.predict(&x).unwrap());
    let imp: f64 = b.importance().iter().map(|(_, v)| v).sum();
    assert!(imp > 0.0);

    let cols: Vec<usize> = (0..x.n_cols()).filter(|&j| x.missing_fraction(j) == 0.0).take(5).collect();
    let xs = x.select_columns(&cols);
    let m = fit_logit(&xs, &y).unwrap();
    let m2 = acctrisk::glm::GlmModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(m.predict(&xs).unwrap(), m2.predict(&xs).unwrap());
}

#[test]
fn feature_csv_round_trip_keeps_masks() {
    let panel = small_panel(5);
    let (x, _, _) = compute_def1(&panel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    x.write_csv(&p, &["header".to_string()]).unwrap();
    let r = FeatureMatrix::read_csv(&p, None).unwrap();
    assert_eq!(r.column_names(), x.column_names());
    assert_eq!(r.rows(), x.rows());
    for j in 0..x.n_cols() {
        for i in 0..x.n_rows() {
            assert_eq!(r.get(i, j), x.get(i, j));
        }
    }
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    let panel = small_panel(6);
    let (x, _, _) = compute_def1(&panel).unwrap();
    let y: Vec<bool> = panel.labels().iter().map(|l| l.default).collect();
    let params = ForestParams { n_trees: 16, ..ForestParams::default() };
    let a = predict_forest(&fit_forest(&x, &y, &params).unwrap(), &x).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| predict_forest(&fit_forest(&x, &y, &params).unwrap(), &x).unwrap());
    assert_eq!(a, b);
    let (x1, _, _) = pool.install(|| compute_def1(&panel).unwrap());
    assert_eq!(x1.rows(), x.rows());
    for j in 0..x.n_cols() {
        assert!((0..x.n_rows()).all(|i| x1.get(i, j).map(f64::to_bits) == x.get(i, j).map(f64::to_bits)));
    }
}
