use ecgstress_eval::benchmark::{blobs, noisy_blobs, quadrant_with_distractors};
use ecgstress_eval::{
    compute_metrics, evaluate_all, grid_search, stratified_folds, stratified_split, Classifier,
    ConfusionMatrix, EvalConfig, EvalError, ModelSpec, Mtry,
};
use ecgstress_ml::{Dataset, Growth, Scaler};
use proptest::prelude::*;

fn labelled(y: Vec<usize>, activities: Vec<&str>) -> Dataset {
    let x = y.iter().enumerate().map(|(i, &c)| vec![i as f64, c as f64]).collect();
    let mut d = Dataset::new(x, y).unwrap();
    d.groups = activities
        .iter()
        .enumerate()
        .map(|(i, a)| (format!("s{}", i % 3), a.to_string()))
        .collect();
    d
}

#[test]
fn metrics_worked_example() {
    let cm = ConfusionMatrix { tp: 9, fp: 1, tn: 8, fn_: 2 };
    let m = compute_metrics(&cm).unwrap();
    assert_eq!(m.accuracy, 17.0 / 20.0);
    assert_eq!(m.precision, 9.0 / 10.0);
    assert_eq!(m.recall, 9.0 / 11.0);
    assert_eq!(m.f1, 18.0 / 21.0);
    // Negative class: precision 8/10, recall 8/9.
    assert!((m.macro_precision - (0.9 + 0.8) / 2.0).abs() < 1e-15);
    assert!((m.macro_recall - (9.0 / 11.0 + 8.0 / 9.0) / 2.0).abs() < 1e-15);
}

#[test]
fn perfect_predictions_score_one() {
    let m = compute_metrics(&ConfusionMatrix { tp: 7, fp: 0, tn: 5, fn_: 0 }).unwrap();
    for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_precision, m.macro_recall, m.macro_f1] {
        assert_eq!(v, 1.0);
    }
}

#[test]
fn empty_matrix_is_rejected() {
    let cm = ConfusionMatrix { tp: 0, fp: 0, tn: 0, fn_: 0 };
    assert!(matches!(compute_metrics(&cm), Err(EvalError::EmptyMatrix)));
}

proptest! {
    #[test]
    fn metrics_ignore_row_order(
        pairs in prop::collection::vec((0usize..2, 0usize..2), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (pred, truth): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (pred2, truth2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let a = compute_metrics(&ConfusionMatrix::from_predictions(&pred, &truth)).unwrap();
        let b = compute_metrics(&ConfusionMatrix::from_predictions(&pred2, &truth2)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metrics_stay_in_unit_interval(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let m = compute_metrics(&ConfusionMatrix { tp, fp, tn, fn_ }).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_precision, m.macro_recall, m.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if m.precision > 0.0 && m.recall > 0.0 {
            let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        }
    }

    #[test]
    fn split_keeps_stratum_proportions(
        sizes in prop::collection::vec(2usize..30, 1..6),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        // Stratum i has label i % 2 and its own activity.
        let mut y = Vec::new();
        let mut acts = Vec::new();
        let names: Vec<String> = (0..sizes.len()).map(|i| format!("a{i}")).collect();
        for (i, &s) in sizes.iter().enumerate() {
            for _ in 0..s {
                y.push(i % 2);
                acts.push(names[i].as_str());
            }
        }
        let n = y.len();
        let data = labelled(y.clone(), acts);
        let split = stratified_split(&data, frac, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        // Each stratum sends within 1/size of the requested share to the test side.
        let mut start = 0;
        for &size in &sizes {
            let in_test = split.test.iter().filter(|&&i| (start..start + size).contains(&i)).count();
            let share = in_test as f64 / size as f64;
            prop_assert!((share - frac).abs() <= 1.0 / size as f64 + 1e-12, "{} of {} at frac {}", in_test, size, frac);
            prop_assert!(in_test >= 1 && in_test < size);
            start += size;
        }
    }

    #[test]
    fn folds_partition_rows(n in 10usize..80, k in 2usize..6, seed in any::<u64>()) {
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let data = labelled(y, vec!["sit"; n]);
        let folds = stratified_folds(&data, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn grid_choice_survives_reordering(perm_seed in any::<u64>(), data_seed in 0u64..4) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let data = noisy_blobs(60, 0.1, data_seed).data;
        let grid: Vec<ModelSpec> = (1..=9).map(|k| ModelSpec::Knn { k }).collect();
        let mut shuffled = grid.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let a = grid_search(&grid, &data, 4, 1).unwrap();
        let b = grid_search(&shuffled, &data, 4, 1).unwrap();
        // Per-point CV results do not depend on position in the grid.
        for row in &b.table {
            let same = a.table.iter().find(|r| r.spec == row.spec).unwrap();
            prop_assert_eq!(same, row);
        }
        // The winners differ only if they tie on both accuracy and F1.
        let score = |r: &ecgstress_eval::GridResult| {
            let row = &r.table[r.best_index];
            (row.mean_accuracy.unwrap(), row.mean_f1.unwrap())
        };
        let (sa, sb) = (score(&a), score(&b));
        prop_assert!((sa.0 - sb.0).abs() < 1e-12 && (sa.1 - sb.1).abs() < 1e-12);
        let first_tied = |g: &[ModelSpec], r: &ecgstress_eval::GridResult| {
            g.iter()
                .find(|s| {
                    let row = r.table.iter().find(|row| &row.spec == *s).unwrap();
                    (row.mean_accuracy.unwrap() - sa.0).abs() < 1e-12
                        && (row.mean_f1.unwrap() - sa.1).abs() < 1e-12
                })
                .cloned()
                .unwrap()
        };
        prop_assert_eq!(&a.best, &first_tied(&grid, &a));
        prop_assert_eq!(&b.best, &first_tied(&shuffled, &b));
    }
}

#[test]
fn hundred_balanced_rows_give_ten_of_each_class() {
    let y: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let data = labelled(y.clone(), vec!["sit"; 100]);
    let split = stratified_split(&data, 0.2, 7).unwrap();
    let ones = split.test.iter().filter(|&&i| y[i] == 1).count();
    assert_eq!((split.test.len(), ones), (20, 10));
    assert_eq!(split, stratified_split(&data, 0.2, 7).unwrap());
    assert_ne!(split, stratified_split(&data, 0.2, 8).unwrap());
}

#[test]
fn singleton_stratum_is_too_small() {
    let data = labelled(vec![0, 0, 1, 1, 1], vec!["sit", "sit", "sit", "sit", "walk"]);
    assert!(matches!(
        stratified_split(&data, 0.2, 0),
        Err(EvalError::StratumTooSmall { size: 1, .. })
    ));
}

#[test]
fn single_point_grid_is_selected() {
    let data = blobs(40, 1).data;
    let only = ModelSpec::Tree { max_depth: Some(2) };
    let r = grid_search(std::slice::from_ref(&only), &data, 5, 0).unwrap();
    assert_eq!((r.best, r.best_index, r.table.len()), (only, 0, 1));
}

#[test]
fn label_noise_pushes_knn_past_one_neighbour() {
    let data = noisy_blobs(300, 0.2, 11).data;
    let grid: Vec<ModelSpec> = (1..=15).map(|k| ModelSpec::Knn { k }).collect();
    let r = grid_search(&grid, &data, 5, 0).unwrap();
    assert_eq!(r.table.len(), 15);
    assert!(matches!(r.best, ModelSpec::Knn { k } if k > 1), "{:?}", r.best);
}

#[test]
fn failing_points_are_skipped() {
    let data = blobs(40, 2).data;
    let grid = [ModelSpec::Knn { k: 0 }, ModelSpec::Knn { k: 3 }];
    let r = grid_search(&grid, &data, 4, 0).unwrap();
    assert!(r.table[0].error.is_some() && r.table[0].mean_accuracy.is_none());
    assert_eq!(r.best_index, 1);
    assert!(matches!(
        grid_search(&grid[..1], &data, 4, 0),
        Err(EvalError::NoViablePoint(_))
    ));
}

fn small_config(only: Vec<Classifier>) -> EvalConfig {
    EvalConfig {
        only: Some(only),
        knn_k: vec![1, 5],
        svm_c: vec![1.0],
        forest_trees: vec![50],
        forest_mtry: vec![Mtry::Sqrt],
        boost_trees: vec![50],
        boost_lr: vec![0.1],
        boost_depth: vec![3],
        ..EvalConfig::default()
    }
}

#[test]
fn all_ten_classifiers_report_in_order() {
    let bench = blobs(60, 5);
    let mut config = small_config(Classifier::ALL.to_vec());
    config.nn.epochs = 5;
    config.nn.input_len = 64;
    let eval = evaluate_all(&bench.data, Some(&bench.raw), &config).unwrap();
    let names: Vec<&str> = eval.report.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        ["KNN", "SVM", "LDA", "DT", "RF", "XgBoost", "LightGBM", "CatBoost", "CNN", "LSTM"]
    );
    for row in &eval.report.rows {
        let m = &row.metrics;
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_precision, m.macro_recall, m.macro_f1] {
            assert!((0.0..=1.0).contains(&v), "{}: {v}", row.name);
        }
        assert_eq!(row.confusion.total(), eval.report.n_test);
        assert_eq!(row.loss_curve.len(), if row.classifier.is_network() { 5 } else { 0 });
    }
    let json = eval.report.to_json().unwrap();
    assert_eq!(ecgstress_eval::EvalReport::from_json(&json).unwrap(), eval.report);
}

#[test]
fn networks_without_raw_windows_are_an_error() {
    let bench = blobs(40, 5);
    let config = small_config(vec![Classifier::Lstm]);
    assert!(matches!(
        evaluate_all(&bench.data, None, &config),
        Err(EvalError::InvalidParameter(_))
    ));
}

#[test]
fn ensembles_beat_knn_with_distractors() {
    let bench = quadrant_with_distractors(400, 8, 3);
    let config = small_config(vec![Classifier::Knn, Classifier::Rf, Classifier::XgBoost]);
    let eval = evaluate_all(&bench.data, None, &config).unwrap();
    let acc = |c| eval.report.row(c).unwrap().metrics.accuracy;
    assert!(acc(Classifier::Rf) > acc(Classifier::Knn));
    assert!(acc(Classifier::XgBoost) > acc(Classifier::Knn));
}

#[test]
fn scalers_see_training_rows_only() {
    let bench = quadrant_with_distractors(120, 2, 9);
    let config = small_config(vec![Classifier::Knn, Classifier::Svm, Classifier::CatBoost]);
    let eval = evaluate_all(&bench.data, None, &config).unwrap();
    let train = bench.data.subset(&eval.split.train);
    let full = Scaler::fit(&bench.data.x);
    let expected = Scaler::fit(&train.x);
    assert_eq!(eval.models.len(), 3);
    for (c, model) in &eval.models {
        assert_eq!(model.scaler, expected, "{c}");
        assert_ne!(model.scaler, full, "{c}");
    }
    assert!(eval.split.train.iter().all(|i| !eval.split.test.contains(i)));
    assert_eq!(eval.split.train.len() + eval.split.test.len(), bench.data.len());
}

#[test]
fn evaluation_is_deterministic() {
    let bench = blobs(60, 8);
    let mut config = small_config(vec![Classifier::Rf, Classifier::LightGbm, Classifier::Cnn]);
    config.nn.epochs = 3;
    config.nn.input_len = 64;
    let a = evaluate_all(&bench.data, Some(&bench.raw), &config).unwrap();
    let b = evaluate_all(&bench.data, Some(&bench.raw), &config).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert!(Growth::LeafWiseHistogram == Classifier::LightGbm.growth().unwrap());
}
