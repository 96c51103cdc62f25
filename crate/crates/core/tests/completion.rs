mod common;

use common::*;
use nnssgd::completion::{
    fit, init_params, preprocess_center, run_from, train, CompletionConfig, CompletionModel, DerivedParams, MetricRecord,
    ModelSelection, NullSink,
};
use nnssgd::data::gen_synthetic;
use nnssgd::linalg::CompactSvd;
use nnssgd::loss::ObservedLoss;
use nnssgd::ssgd::objective;

fn small_config(rank: usize, super_iters: usize) -> CompletionConfig<f64> {
    CompletionConfig { rank, super_iters, timing: false, ..Default::default() }
}

#[test]
fn derived_parameters_match_dense_oracle() {
    let mut r = rng(30);
    let z = random_sparse(&mut r, 60, 40, 0.3);
    let (p, x0) = init_params(&z, 5, 0.015, 0.005).unwrap();

    let zd = to_na(&z.to_dense());
    let x0_oracle = dense_truncate_project(&zd, 5, f64::INFINITY);
    assert!(rel_err(&to_na(&x0.densify()), &x0_oracle) < 1e-8);

    let zf2 = zd.norm_squared();
    let fit: f64 = z.iter().map(|(i, j, v)| (x0_oracle[(i, j)] - v).powi(2)).sum();
    let nuclear = nuclear_norm(&x0_oracle);
    let beta = 0.015 * fit / (zf2 * nuclear);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs();
    assert!(close(p.alpha, 1.0 / zf2));
    assert!(close(p.beta_reg, beta));
    assert!(close(p.ball_radius, 1.0 / beta));
    assert!(close(p.eta, 0.005 * zf2));
}

#[test]
fn training_commutes_with_rescaling() {
    let prob = gen_synthetic::<f64>(40, 30, 3, 0.4, 0.1, 2).unwrap();
    let c = 3.0;
    let scaled = prob.train.map_values(|_, _, v| c * v);

    let (p1, _) = init_params(&prob.train, 3, 0.015, 0.005).unwrap();
    let (p3, _) = init_params(&scaled, 3, 0.015, 0.005).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
    assert!(close(p3.alpha, p1.alpha / (c * c)));
    assert!(close(p3.beta_reg, p1.beta_reg / c));
    assert!(close(p3.ball_radius, p1.ball_radius * c));
    assert!(close(p3.eta, p1.eta * c * c));

    let cfg = small_config(3, 4);
    let a = train(&prob.train, None, &cfg, &mut NullSink).unwrap();
    let b = train(&scaled, None, &cfg, &mut NullSink).unwrap();
    let want = to_na(&a.densify()) * c;
    assert!(rel_err(&to_na(&b.densify()), &want) <= 1e-6);
}

#[test]
fn unregularized_run_from_zero_fits_the_data() {
    let prob = gen_synthetic::<f64>(30, 20, 2, 0.6, 0.0, 5).unwrap();
    let z = &prob.train;
    let zf2 = z.frobenius_norm_sq();
    let params = DerivedParams { alpha: 1.0 / zf2, beta_reg: 0.0, ball_radius: 1e6, eta: 0.02 * zf2 };
    let mut records: Vec<MetricRecord<f64>> = Vec::new();
    let cfg = small_config(2, 60);
    let x = run_from(z, None, &params, CompactSvd::zero(30, 20), &cfg, &mut records).unwrap();
    let start = records[0].train_rmse;
    let end = records.last().unwrap().train_rmse;
    assert!((start - (zf2 / z.nnz() as f64).sqrt()).abs() < 1e-12);
    assert!(end <= 0.05 * start, "train RMSE went from {start} to {end}");
    assert!(x.rank() <= 2);
}

#[test]
fn predictions_match_dense_model_plus_offsets() {
    let mut r = rng(31);
    let z = random_sparse(&mut r, 10, 8, 0.5);
    let (_, _, centering) = preprocess_center(&z, None).unwrap();
    let factors = random_compact(&mut r, 10, 8, 3);
    let dense = to_na(&factors.densify());
    let model = CompletionModel::new(factors, centering.clone()).unwrap();
    for i in 0..10 {
        for j in 0..8 {
            let want = dense[(i, j)] + (centering.row_means[i] + centering.col_means[j]) / 2.0;
            assert!((model.predict(i, j).unwrap() - want).abs() <= 1e-12);
        }
    }
    assert!(model.predict(10, 0).is_err());
}

#[test]
fn rmse_matches_direct_formula() {
    let mut r = rng(32);
    let test = random_sparse(&mut r, 12, 9, 0.4);
    let train = random_sparse(&mut r, 12, 9, 0.5);
    let (_, _, centering) = preprocess_center(&train, None).unwrap();
    let model = CompletionModel::new(random_compact(&mut r, 12, 9, 2), centering).unwrap();
    let sse: f64 = test.iter().map(|(i, j, v)| (model.predict(i, j).unwrap() - v).powi(2)).sum();
    let want = (sse / test.nnz() as f64).sqrt();
    assert!((model.rmse(&test).unwrap() - want).abs() <= 1e-12);
}

#[test]
fn centering_round_trips() {
    let mut r = rng(33);
    let z = random_sparse(&mut r, 15, 11, 0.3);
    let (centered, _, c) = preprocess_center(&z, None).unwrap();
    let back = c.uncenter(&centered).unwrap();
    for ((i, j, a), (_, _, b)) in z.iter().zip(back.iter()) {
        assert!((a - b).abs() <= 1e-12, "({i}, {j}): {a} vs {b}");
    }
}

#[test]
fn centered_test_values_use_train_means() {
    let mut r = rng(34);
    let train = random_sparse(&mut r, 8, 6, 0.6);
    let test = random_sparse(&mut r, 8, 6, 0.3);
    let (_, te, c) = preprocess_center(&train, Some(&test)).unwrap();
    for ((i, j, raw), (_, _, cen)) in test.iter().zip(te.unwrap().iter()) {
        let offset = c.offset(Some(i), Some(j));
        assert!((raw - offset - cen).abs() <= 1e-12);
    }
}

#[test]
fn rank_bound_holds_for_every_run_length() {
    let prob = gen_synthetic::<f64>(50, 30, 4, 0.3, 0.2, 8).unwrap();
    for s in [0, 1, 3, 7] {
        let x = train(&prob.train, Some(&prob.test), &small_config(4, s), &mut NullSink).unwrap();
        assert!(x.rank() <= 4);
        assert!(x.orthonormality_error() <= 1e-8);
    }
}

#[test]
fn best_selection_never_loses_to_warm_start() {
    let prob = gen_synthetic::<f64>(40, 30, 3, 0.3, 0.3, 9).unwrap();
    let mut cfg = small_config(3, 5);
    cfg.selection = ModelSelection::BestObjective;
    let mut records: Vec<MetricRecord<f64>> = Vec::new();
    let x = train(&prob.train, None, &cfg, &mut records).unwrap();
    let (p, _) = init_params(&prob.train, 3, cfg.delta, cfg.nu).unwrap();
    let loss = ObservedLoss::squared(p.alpha, &prob.train);
    let best = objective(&x, &loss, p.beta_reg);
    assert!(best <= records[0].objective);
    assert!(records.iter().all(|rec| best <= rec.objective + 1e-15));
}

#[test]
fn zero_super_iterations_return_the_warm_start() {
    let prob = gen_synthetic::<f64>(30, 25, 3, 0.4, 0.1, 10).unwrap();
    let mut records: Vec<MetricRecord<f64>> = Vec::new();
    let x = train(&prob.train, Some(&prob.test), &small_config(3, 0), &mut records).unwrap();
    let (_, x0) = init_params(&prob.train, 3, 0.015, 0.005).unwrap();
    assert_eq!(x, x0);
    assert_eq!(records.len(), 1);
    assert_eq!((records[0].super_iter, records[0].iter), (0, 0));
    assert!(records[0].test_rmse.is_some());
    assert_eq!(records[0].wall_seconds, None);
}

#[test]
fn metrics_follow_super_iteration_cadence() {
    let prob = gen_synthetic::<f64>(30, 25, 3, 0.4, 0.1, 11).unwrap();
    let mut cfg = small_config(3, 5);
    cfg.metrics_every = 2;
    let mut records: Vec<MetricRecord<f64>> = Vec::new();
    train(&prob.train, None, &cfg, &mut records).unwrap();
    let per = 25usize.div_ceil(3);
    let got: Vec<_> = records.iter().map(|r| (r.super_iter, r.iter)).collect();
    assert_eq!(got, vec![(0, 0), (2, 2 * per), (4, 4 * per), (5, 5 * per)]);
}

#[test]
fn fit_with_centering_is_deterministic() {
    let prob = gen_synthetic::<f64>(30, 20, 2, 0.5, 0.1, 12).unwrap();
    let shifted = prob.train.map_values(|_, _, v| v + 3.0);
    let cfg = small_config(2, 3);
    let a = fit(&shifted, None, &cfg, true, &mut NullSink).unwrap();
    let b = fit(&shifted, None, &cfg, true, &mut NullSink).unwrap();
    assert_eq!(a.factors, b.factors);
    assert!((a.centering.global_mean - 3.0).abs() < 0.5);
}

#[test]
fn invalid_configurations_are_rejected() {
    let prob = gen_synthetic::<f64>(20, 10, 2, 0.5, 0.0, 13).unwrap();
    for cfg in [
        small_config(0, 1),
        small_config(11, 1),
        CompletionConfig { k: Some(11), ..small_config(2, 1) },
        CompletionConfig { delta: 0.0, ..small_config(2, 1) },
        CompletionConfig { nu: f64::NAN, ..small_config(2, 1) },
    ] {
        assert!(train(&prob.train, None, &cfg, &mut NullSink).is_err());
    }
}
