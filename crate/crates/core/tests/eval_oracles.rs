mod common;

use care2vec::dataset::{to_binary, LabelScheme};
use care2vec::eval::{cross_validate, kfold_split, roc_auc, ModelRecipe};
use care2vec::exec::Execution;
use care2vec::numerics::Rng;
use care2vec::pipeline::{MajorityRecipe, TreeRecipe};
use care2vec::synthetic::{scadi_like, SyntheticOptions};
use proptest::prelude::*;

use common::pair_counting_auc;

#[test]
fn trapezoid_auc_equals_pair_counting_on_random_instances() {
    let mut rng = Rng::new(2024);
    let mut checked = 0;
    while checked < 100 {
        let n = 2 + rng.below(9) as usize;
        // coarse scores so tied groups are frequent
        let scores: Vec<f64> = (0..n).map(|_| rng.below(5) as f64 / 4.0).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(2) as usize).collect();
        let Ok(curve) = roc_auc(&scores, &labels) else { continue };
        assert!((curve.auc - pair_counting_auc(&scores, &labels)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn roc_points_are_monotone_and_anchored() {
    let mut rng = Rng::new(5);
    for _ in 0..50 {
        let scores: Vec<f64> = (0..12).map(|_| rng.next_f64()).collect();
        let mut labels: Vec<usize> = (0..12).map(|_| rng.below(2) as usize).collect();
        labels[0] = 0;
        labels[1] = 1;
        let c = roc_auc(&scores, &labels).unwrap();
        assert_eq!(c.points[0], (0.0, 0.0));
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
        for w in c.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert!((0.0..=1.0).contains(&c.auc));
    }
}

proptest! {
    #[test]
    fn auc_is_invariant_under_increasing_transforms(
        pairs in prop::collection::vec((0u8..6, 0usize..2), 2..16),
        a in 0.1f64..5.0,
        b in -3.0f64..3.0,
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let base = roc_auc(&scores, &labels).unwrap().auc;
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubic: Vec<f64> = scores.iter().map(|s| s.powi(3) + s).collect();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        for t in [affine, cubic, exp] {
            prop_assert!((roc_auc(&t, &labels).unwrap().auc - base).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_partition_the_rows(n in 2usize..200, k_raw in 2usize..20, seed in any::<u64>()) {
        let k = k_raw.min(n);
        let f = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(f.fold_of.len(), n);
        let mut seen = vec![0usize; n];
        for fold in 0..k {
            for i in f.test_indices(fold) {
                seen[i] += 1;
            }
            let train = f.train_indices(fold);
            prop_assert_eq!(train.len() + f.test_indices(fold).len(), n);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = f.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn constant_majority_matches_closed_form() {
    let data = scadi_like(&SyntheticOptions::default(), 11);
    let folds = kfold_split(70, 10, 3).unwrap();
    let report = cross_validate(&MajorityRecipe, &data, &folds, Execution::Sequential).unwrap();
    assert_eq!(report.fold_accuracy.len(), 10);
    // the 29-row class dominates every training split (at least 22 vs at most 16)
    for f in 0..10 {
        let test = folds.test_indices(f);
        let hits = test.iter().filter(|&&i| data.labels()[i] == 5).count();
        assert_eq!(report.fold_accuracy[f], hits as f64 / test.len() as f64);
    }
    assert!((report.mean_cv_score - 29.0 / 70.0).abs() < 1e-12);
}

#[test]
fn report_means_equal_fold_means() {
    let data = to_binary(&scadi_like(&SyntheticOptions::default(), 12)).unwrap();
    let folds = kfold_split(70, 10, 4).unwrap();
    let r = cross_validate(&TreeRecipe::default(), &data, &folds, Execution::Sequential).unwrap();
    let mean: f64 = r.fold_accuracy.iter().sum::<f64>() / 10.0;
    assert!((r.mean_cv_score - mean).abs() < 1e-12);
    let defined: Vec<f64> = r.fold_auc.iter().flatten().copied().collect();
    assert_eq!(defined.len() + r.annotations.len(), 10);
    if !defined.is_empty() {
        let m = defined.iter().sum::<f64>() / defined.len() as f64;
        assert!((r.mean_auc.unwrap() - m).abs() < 1e-12);
    }
    assert_eq!(r.task, LabelScheme::Binary);
}

#[test]
fn single_class_folds_are_annotated_not_averaged() {
    // 3 positives in 70 rows leave most 7-row folds without a positive
    let multi = scadi_like(&SyntheticOptions::default(), 13);
    let mut labels: Vec<usize> = vec![0; 70];
    labels[0] = 1;
    labels[1] = 1;
    labels[2] = 1;
    let data = care2vec::dataset::Dataset::new(multi.features().clone(), labels, LabelScheme::Binary, multi.feature_names().to_vec()).unwrap();
    let folds = kfold_split(70, 10, 0).unwrap();
    let r = cross_validate(&MajorityRecipe, &data, &folds, Execution::Sequential).unwrap();
    let undefined = r.fold_auc.iter().filter(|a| a.is_none()).count();
    assert!(undefined >= 7);
    assert_eq!(r.annotations.len(), undefined);
    assert!(r.annotations[0].contains("AUC undefined"));
}

#[test]
fn parallel_and_sequential_reports_are_identical() {
    let data = scadi_like(&SyntheticOptions::default(), 14);
    let folds = kfold_split(70, 10, 9).unwrap();
    let recipe: &dyn ModelRecipe = &TreeRecipe::default();
    let a = cross_validate(recipe, &data, &folds, Execution::Sequential).unwrap();
    let b = cross_validate(recipe, &data, &folds, Execution::Parallel { jobs: 4 }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn fold_errors_carry_the_fold_id() {
    struct Failing;
    impl ModelRecipe for Failing {
        fn descriptor(&self) -> care2vec::eval::ConfigDescriptor {
            care2vec::eval::ConfigDescriptor::new("failing")
        }
        fn fit(
            &self,
            train: &care2vec::dataset::Dataset,
            _: Option<&care2vec::numerics::Matrix>,
            _: u64,
        ) -> care2vec::Result<Box<dyn care2vec::eval::FittedModel>> {
            if train.n_rows() < 63 {
                return Err(care2vec::Error::Config("boom".into()));
            }
            MajorityRecipe.fit(train, None, 0)
        }
    }
    let data = scadi_like(&SyntheticOptions { n_rows: 68, ..SyntheticOptions::default() }, 1);
    // 68 rows in 10 folds: the first 8 folds hold 7 rows, training on 61
    let err = cross_validate(&Failing, &data, &kfold_split(68, 10, 0).unwrap(), Execution::Sequential).unwrap_err();
    assert!(matches!(err, care2vec::Error::Fold { fold: 0, .. }), "{err}");
    assert!(err.to_string().starts_with("fold 1:"));
}
