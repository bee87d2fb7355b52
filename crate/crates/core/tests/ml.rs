use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sleeplite::ml::forest::{ForestParams, RandomForest};
use sleeplite::ml::knn::KnnModel;
use sleeplite::ml::serialize::{from_bytes, load_model, save_model, to_bytes};
use sleeplite::ml::tree::{Tree, TreeParams};
use sleeplite::ml::{
    cross_validate, stratified_folds, train_classifier, tune_hyperparameters, Algo, ClassifierSpec,
    SearchSpace,
};
use sleeplite::SleepStage;

mod common;
use common::ml::*;

#[test]
fn knn_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in [5usize, 17, 60, 200, 500] {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(0..5) as f64).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let queries: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..6.0)).collect())
            .collect();
        for k in 1..=15 {
            let m = KnnModel::fit(&x, &y, k);
            for q in &queries {
                assert_eq!(m.predict(q), knn_oracle(&x, &y, q, k.min(n)), "n {n} k {k}");
            }
        }
    }
}

#[test]
fn single_tree_forest_is_a_tree() {
    let (x, y) = blobs(300, 6, 1.0, 4);
    let yi: Vec<usize> = y.iter().map(|s| s.index()).collect();
    let tree = TreeParams {
        max_depth: 6,
        ..TreeParams::default()
    };
    let forest = RandomForest::fit(
        &x,
        &yi,
        &ForestParams {
            n_trees: 1,
            tree: tree.clone(),
            bootstrap: false,
        },
        9,
    );
    let dt = Tree::fit_classifier(&x, &yi, &tree, 9);
    assert_eq!(forest.trees[0], dt);
    for r in &x {
        assert_eq!(forest.predict(r), dt.predict(r));
    }
}

#[test]
fn shuffled_labels_score_at_chance() {
    let (x, mut y) = blobs(400, 8, 2.0, 5);
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    for algo in [Algo::Knn, Algo::DecisionTree, Algo::RandomForest] {
        let spec = small(algo, 1);
        let cv = cross_validate(&spec, &names(8), &x, &y, 5, 2).unwrap();
        assert!(
            (cv.mean_accuracy - 0.25).abs() <= 0.1,
            "{algo}: {}",
            cv.mean_accuracy
        );
    }
}

#[test]
fn every_classifier_learns_separable_blobs() {
    let (x, y) = blobs(400, 8, 4.0, 7);
    let (xt, yt) = blobs(200, 8, 4.0, 8);
    for algo in Algo::ALL {
        let m = train_classifier(&ClassifierSpec::new(algo, 3), &names(8), &x, &y).unwrap();
        let p = m.predict(&names(8), &xt).unwrap();
        let acc = p.labels.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        assert!(acc > 0.9, "{algo}: {acc}");
        for s in &p.scores {
            assert!(
                (s.iter().sum::<f64>() - 1.0).abs() < 1e-9,
                "{algo} scores {s:?}"
            );
        }
    }
}

#[test]
fn nan_cells_take_the_training_median() {
    let (mut x, y) = blobs(200, 4, 3.0, 10);
    for i in (0..200).step_by(7) {
        x[i][2] = f64::NAN;
    }
    let mut col: Vec<f64> = x.iter().map(|r| r[2]).filter(|v| !v.is_nan()).collect();
    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = col.len();
    let med = if n % 2 == 1 {
        col[n / 2]
    } else {
        (col[n / 2 - 1] + col[n / 2]) / 2.0
    };
    for algo in Algo::ALL {
        let m = train_classifier(&ClassifierSpec::new(algo, 1), &names(4), &x, &y).unwrap();
        assert_eq!(m.imputer.medians[2], med);
        let probe = vec![vec![1.0, 0.5, f64::NAN, -0.2]];
        let filled = vec![vec![1.0, 0.5, med, -0.2]];
        assert_eq!(
            m.predict_rows(&probe).unwrap(),
            m.predict_rows(&filled).unwrap(),
            "{algo}"
        );
        assert!(m
            .predict_rows(&[vec![1.0, f64::INFINITY, 0.0, 0.0]])
            .is_err());
    }
}

#[test]
fn saved_models_round_trip() {
    let (mut x, y) = blobs(150, 5, 2.0, 12);
    x[3][1] = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    for algo in Algo::ALL {
        let m = train_classifier(&small(algo, 4), &names(5), &x, &y).unwrap();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m, "{algo}");
        assert_eq!(to_bytes(&back), bytes);
        let p = dir.path().join(format!("{algo}.seml"));
        save_model(&m, &p).unwrap();
        let loaded = load_model(&p).unwrap();
        assert_eq!(
            loaded.predict_rows(&x).unwrap(),
            m.predict_rows(&x).unwrap()
        );
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}

#[test]
fn feature_names_must_match() {
    let (x, y) = blobs(80, 3, 3.0, 13);
    let m = train_classifier(
        &ClassifierSpec::new(Algo::DecisionTree, 0),
        &names(3),
        &x,
        &y,
    )
    .unwrap();
    let other = vec!["a".to_string(), "b".into(), "c".into()];
    assert!(m.predict(&other, &x).is_err());
    assert!(m.predict_rows(&[vec![0.0; 4]]).is_err());
}

#[test]
fn tuning_keeps_the_best_trial() {
    let (x, y) = blobs(160, 4, 1.5, 14);
    let space = SearchSpace::default_for(Algo::Knn);
    let r = tune_hyperparameters(
        &space,
        &ClassifierSpec::new(Algo::Knn, 0),
        &names(4),
        &x,
        &y,
        8,
        4,
        5,
    )
    .unwrap();
    assert_eq!(r.trace.len(), 8);
    let best = r
        .trace
        .iter()
        .map(|t| t.mean_macro_f1)
        .fold(f64::MIN, f64::max);
    assert_eq!(r.trace[r.best_trial].mean_macro_f1, best);
    assert!(r.trace[..r.best_trial]
        .iter()
        .all(|t| t.mean_macro_f1 < best));
    let k = r.trace[r.best_trial].params[0].1;
    assert_eq!(r.best.get("k"), k);
    let again = tune_hyperparameters(
        &space,
        &ClassifierSpec::new(Algo::Knn, 0),
        &names(4),
        &x,
        &y,
        8,
        4,
        5,
    )
    .unwrap();
    assert_eq!(again, r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_and_stratify(codes in prop::collection::vec(0usize..4, 20..300), k in 2usize..8, seed in any::<u64>()) {
        let y: Vec<SleepStage> = codes.iter().map(|&c| SleepStage::ALL[c]).collect();
        let Ok(folds) = stratified_folds(&y, k, seed) else { return Ok(()) };
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for s in SleepStage::ALL {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == s).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }
}
