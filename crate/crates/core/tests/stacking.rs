use rand::{Rng as _, SeedableRng};
use stackdx::forest::ForestParams;
use stackdx::gbdt::GbdtParams;
use stackdx::mlp::MlpParams;
use stackdx::rng::{Rng, RngPlan};
use stackdx::sampling::stratified_kfold;
use stackdx::stacking::{
    build_oof_matrix, fit_meta, fit_stacked, refit_and_predict, BaseLearner, BaseModelKind, Learner,
    NewtonOptions, TestScoring,
};
use stackdx::{LabeledDataset, ModelSpecs};

fn small_specs() -> ModelSpecs {
    ModelSpecs {
        forest: ForestParams { n_trees: 15, ..ForestParams::default() },
        gbdt: GbdtParams { n_rounds: 15, ..GbdtParams::default() },
        mlp: MlpParams { hidden: vec![8], epochs: 5, ..MlpParams::default() },
    }
}

fn dataset(seed: u64, n: usize) -> LabeledDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u32>> = (0..n).map(|_| (0..12u32).filter(|_| rng.random_bool(0.3)).collect()).collect();
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
    let rows = rows
        .into_iter()
        .zip(&labels)
        .map(|(mut r, &y)| {
            if y == 1 && rng.random_bool(0.7) && !r.contains(&0) {
                r.insert(0, 0);
            }
            r
        })
        .collect();
    LabeledDataset::from_rows(12, rows, labels).unwrap()
}

#[test]
fn oof_rows_ignore_their_own_fold_labels() {
    let data = dataset(1, 120);
    let k = 5;
    let folds = stratified_kfold(&data.labels, k, &mut Rng::seed_from_u64(2)).unwrap();
    let specs = small_specs();
    let plan = RngPlan::new(3);
    let base = build_oof_matrix(&data, &folds, k, &specs, &plan).unwrap();

    // Relabel fold 2 only (swapping classes keeps both present elsewhere).
    let mut flipped = data.clone();
    for (i, &f) in folds.iter().enumerate() {
        if f == 2 {
            flipped.labels[i] = 1 - flipped.labels[i];
        }
    }
    let perturbed = build_oof_matrix(&flipped, &folds, k, &specs, &plan).unwrap();
    let mut changed_elsewhere = 0;
    for (i, &f) in folds.iter().enumerate() {
        if f == 2 {
            assert_eq!(base.rows[i], perturbed.rows[i], "row {i} of the relabelled fold moved");
        } else if base.rows[i] != perturbed.rows[i] {
            changed_elsewhere += 1;
        }
    }
    // The relabelled fold trains the other folds' models, so they must move.
    assert!(changed_elsewhere > 0);
}

#[test]
fn oof_matrix_is_complete_and_reproducible() {
    let data = dataset(4, 80);
    let folds = stratified_kfold(&data.labels, 4, &mut Rng::seed_from_u64(1)).unwrap();
    let specs = small_specs();
    let a = build_oof_matrix(&data, &folds, 4, &specs, &RngPlan::new(9)).unwrap();
    let b = build_oof_matrix(&data, &folds, 4, &specs, &RngPlan::new(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 80);
    assert!(a.rows.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(a.labels, data.labels);
}

#[test]
fn learner_names_follow_model_order() {
    let specs = small_specs();
    let names: Vec<String> = BaseModelKind::ALL
        .iter()
        .map(|&kind| BaseLearner { kind, specs: &specs }.name().to_string())
        .collect();
    assert_eq!(names, ["rf", "lgbm", "dnn"]);
}

#[test]
fn stacked_scores_track_the_signal() {
    let train = dataset(5, 160);
    let test = dataset(6, 60);
    let folds = stratified_kfold(&train.labels, 5, &mut Rng::seed_from_u64(3)).unwrap();
    let specs = small_specs();
    let plan = RngPlan::new(11);
    let oof = build_oof_matrix(&train, &folds, 5, &specs, &plan).unwrap();
    let meta = fit_meta(&oof, 1.0, &NewtonOptions::default()).unwrap();
    assert!(meta.converged);
    for scoring in [TestScoring::Refit, TestScoring::FoldAverage] {
        let ens = fit_stacked(&train, &folds, &specs, &meta, scoring, &plan).unwrap();
        let scores = ens.predict(&test).unwrap();
        let (_, direct) = refit_and_predict(&train, &folds, &test, &specs, &meta, scoring, &plan).unwrap();
        assert_eq!(scores.meta, direct.meta);
        let auc = stackdx::metrics::auc(&test.labels, &scores.meta).unwrap();
        // Feature 0 is the only signal; its indicator is the best ranking.
        let indicator: Vec<f64> = test.features.rows().iter().map(|r| f64::from(u8::from(r.contains(&0)))).collect();
        let ceiling = stackdx::metrics::auc(&test.labels, &indicator).unwrap();
        assert!(auc > 0.6 && auc >= ceiling - 0.05, "{scoring:?}: meta AUC {auc} vs indicator {ceiling}");
    }
}
