mod common;

use cde_core::dgp::SyntheticDgp;
use cde_core::flexcode::{
    fit_flexcode, fit_flexcode_with, fit_flexzboost, flexcode_predict, flexzboost_alpha_grid, max_terms, CosineBasis,
    FlexBackend,
};
use cde_core::linalg::Matrix;
use cde_core::quantile_tree::{fit_quantile_tree, quantile_tree_levels, quantile_tree_predict, QuantileTreeFit};
use cde_core::scoring::crps;
use cde_core::special::normal_crps;
use cde_core::tree::{
    fit_forest, fit_gbt, fit_regression_tree, pinball_loss, ForestParams, GbtLoss, GbtParams, Node, TreeParams,
};
use cde_core::{make_eval_grid, ConditionalDensity, Dataset, EvalGrid, GridDensity, PredictionRecord};
use common::phi;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn uniform_x(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Best depth-1 split by scanning every midpoint of every feature.
fn exhaustive_stump(x: &Matrix, y: &[f64]) -> (usize, f64) {
    let sse = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0, 0.0);
    for j in 0..x.cols() {
        let mut vals = x.column(j);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<f64>, Vec<f64>) = {
                let mut l = Vec::new();
                let mut r = Vec::new();
                for (row, &yi) in x.iter_rows().zip(y) {
                    if row[j] <= t { l.push(yi) } else { r.push(yi) }
                }
                (l, r)
            };
            let s = sse(&l) + sse(&r);
            if s < best.0 {
                best = (s, j, t);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn stump_matches_the_exhaustive_scan() {
    let x = uniform_x(200, 3, 1);
    let y: Vec<f64> = x.iter_rows().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
    let tree = fit_regression_tree(&x, &y, TreeParams { max_depth: 1, min_leaf: 1, feature_fraction: 1.0 }, 0).unwrap();
    let (feature, threshold) = exhaustive_stump(&x, &y);
    match &tree.nodes()[0] {
        Node::Split { feature: f, threshold: t, .. } => {
            assert_eq!((*f, *t), (feature, threshold));
            assert_eq!(*f, 0);
            assert!(t.abs() < 0.05);
        }
        other => panic!("expected a split, got {other:?}"),
    }
    assert_eq!(tree.predict(&[-0.5, 0.0, 0.0]), 0.0);
    assert_eq!(tree.predict(&[0.5, 0.0, 0.0]), 1.0);
}

#[test]
fn forest_examples() {
    let x = uniform_x(300, 4, 2);
    let constant = vec![2.5; 300];
    let f = fit_forest(&x, &constant, ForestParams::default(), 3).unwrap();
    assert!(x.iter_rows().all(|r| f.predict(r) == 2.5));

    let beta = [1.0, -2.0, 0.5, 0.0, 1.5];
    let xs = uniform_x(2500, 5, 4);
    let y: Vec<f64> = xs.iter_rows().map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
    let idx: Vec<usize> = (0..2000).collect();
    let train = xs.select_rows(&idx);
    let forest = fit_forest(&train, &y[..2000], ForestParams::default(), 5).unwrap();
    let test_y = &y[2000..];
    let mean = test_y.iter().sum::<f64>() / 500.0;
    let var = test_y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
    let mse = (2000..2500).map(|i| (forest.predict(xs.row(i)) - y[i]).powi(2)).sum::<f64>() / 500.0;
    assert!(mse < var, "{mse} vs {var}");

    let again = fit_forest(&train, &y[..2000], ForestParams::default(), 5).unwrap();
    assert_eq!(forest, again);
}

#[test]
fn gbt_rejects_bad_quantile_levels() {
    let x = uniform_x(20, 1, 6);
    let y = vec![0.0; 20];
    for tau in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(fit_gbt(&x, &y, GbtLoss::Pinball(tau), GbtParams::default(), 0).is_err());
    }
}

#[test]
fn flexcode_on_a_response_independent_of_x() {
    let n = 1000;
    let x = uniform_x(n, 2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ds = Dataset::unnamed(x, y).unwrap();
    let fit = fit_flexcode(&ds, FlexBackend::forest(), 9).unwrap();
    assert!(fit.n_terms() <= 5, "chose {}", fit.n_terms());
    for row in uniform_x(10, 2, 10).iter_rows() {
        let c = fit.coefficients(row);
        assert_eq!(c[0], 1.0);
        assert!(c[1..].iter().all(|b| b.abs() < 0.2), "{c:?}");
    }
}

#[test]
fn flexzboost_sharpening_never_loses_to_alpha_one() {
    let ds = SyntheticDgp::Bimodal.simulate(500, 11).unwrap();
    let mut alphas = flexzboost_alpha_grid();
    alphas.push(1.0);
    let fit = fit_flexcode_with(&ds, FlexBackend::boosted(), &alphas, 12).unwrap();
    let at_one = fit.cv_loss_by_alpha().iter().find(|(a, _)| *a == 1.0).unwrap().1;
    let chosen = fit.cv_loss_by_alpha().iter().find(|(a, _)| *a == fit.alpha()).unwrap().1;
    assert!(chosen <= at_one);
    assert!((0.5..=2.0).contains(&fit.alpha()));

    let plain = fit_flexzboost(&ds, 12).unwrap();
    assert!(flexzboost_alpha_grid().contains(&plain.alpha()));
}

#[test]
fn flexcode_densities_are_proper_and_reproducible() {
    let ds = SyntheticDgp::Bimodal.simulate(400, 13).unwrap();
    let grid = make_eval_grid(&ds.response).unwrap();
    let a = fit_flexcode(&ds, FlexBackend::forest(), 14).unwrap();
    let b = fit_flexcode(&ds, FlexBackend::forest(), 14).unwrap();
    assert_eq!(a, b);
    assert_eq!(max_terms(ds.n()), 20);
    for row in uniform_x(20, 2, 15).iter_rows() {
        let d = flexcode_predict(&a, row, &grid).unwrap();
        assert!(d.values().iter().all(|v| *v >= 0.0));
        assert!((d.integral() - 1.0).abs() < 1e-6);
        assert_eq!(d, b.density(row, &grid).unwrap());
    }
    assert!(flexcode_predict(&a, &[0.0], &grid).is_err());
}

#[test]
fn sharpening_a_two_gaussian_mixture() {
    let grid = EvalGrid::new(-4.0, 4.0).unwrap();
    let d = GridDensity::from_fn(grid, |t| 0.5 * phi((t + 1.5) / 0.6) + 0.5 * phi((t - 1.5) / 0.6)).unwrap();
    let s = d.sharpen(2.0).unwrap();
    assert!((s.integral() - 1.0).abs() < 1e-9);
    let ratio = |g: &GridDensity| g.value_at(1.5) / g.value_at(0.0);
    assert!(ratio(&s) > ratio(&d));
    assert_eq!(d.sharpen(1.0).unwrap(), d);
}

#[test]
fn quantile_tree_constant_and_symmetric_noise() {
    let x = uniform_x(100, 2, 16);
    let ds = Dataset::unnamed(x.clone(), vec![3.0; 100]).unwrap();
    let fit = fit_quantile_tree(&ds, GbtParams { rounds: 10, ..GbtParams::default() }, 0).unwrap();
    assert_eq!(fit.levels(), quantile_tree_levels().as_slice());
    let grid = EvalGrid::new(0.0, 6.0).unwrap();
    let d = quantile_tree_predict(&fit, &[0.0, 0.0], &grid).unwrap();
    assert!((d.integral() - 1.0).abs() < 1e-6);
    let near: f64 = (0..grid.len()).filter(|&i| (grid.point(i) - 3.0).abs() <= grid.step()).map(|i| d.values()[i]).sum();
    assert!(near * grid.step() > 0.99, "{near}");

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let y: Vec<f64> = (0..400).map(|_| 2.0 + rng.sample::<f64, _>(StandardNormal)).collect();
    let ds = Dataset::unnamed(uniform_x(400, 2, 18), y).unwrap();
    let fit = fit_quantile_tree(&ds, GbtParams { rounds: 50, max_depth: 2, ..GbtParams::default() }, 1).unwrap();
    let median = fit.quantile_function(&[0.0, 0.0]).unwrap().values()[24];
    assert!((median - 2.0).abs() < 0.3, "{median}");
}

#[test]
fn quantile_tree_sorts_whatever_order_the_models_come_in() {
    let ds = SyntheticDgp::Bimodal.simulate(200, 19).unwrap();
    let fit = fit_quantile_tree(&ds, GbtParams { rounds: 20, ..GbtParams::default() }, 2).unwrap();
    let mut models = fit.models().to_vec();
    models.reverse();
    models.swap(3, 30);
    let shuffled = QuantileTreeFit::from_models(fit.levels().to_vec(), models, 2).unwrap();
    let grid = make_eval_grid(&ds.response).unwrap();
    for row in uniform_x(10, 2, 20).iter_rows() {
        assert_eq!(fit.density(row, &grid).unwrap(), shuffled.density(row, &grid).unwrap());
    }
    let again = fit_quantile_tree(&ds, GbtParams { rounds: 20, ..GbtParams::default() }, 2).unwrap();
    assert_eq!(fit, again);
}

#[test]
fn quantile_tree_crps_is_close_to_the_gaussian_truth() {
    let dgp = SyntheticDgp::hetero_gaussian();
    let SyntheticDgp::HeteroGaussian { beta, gamma } = &dgp else { unreachable!() };
    let train = dgp.simulate(10_000, 21).unwrap();
    let test = dgp.simulate(100, 22).unwrap();
    let fit = fit_quantile_tree(&train, GbtParams::default(), 3).unwrap();
    let grid = make_eval_grid(&train.response).unwrap();
    let (mut model, mut truth) = (0.0, 0.0);
    for (row, &y) in test.features.iter_rows().zip(&test.response) {
        let rec = PredictionRecord::quantiles(fit.quantile_function(row).unwrap());
        model += crps(&rec, y, &grid).unwrap();
        let (m, s) = SyntheticDgp::hetero_params(beta, gamma, row);
        truth += normal_crps(y, m, s);
    }
    assert!((model - truth).abs() <= 0.1 * truth, "{model} vs {truth}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn depth_zero_pinball_is_the_breakpoint_optimum(
        y in prop::collection::vec(-10.0f64..10.0, 1..=200),
        tau in 0.01f64..0.99,
    ) {
        let n = y.len();
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let params = GbtParams { rounds: 1, max_depth: 0, learning_rate: 1.0, min_leaf: 1 };
        let m = fit_gbt(&x, &y, GbtLoss::Pinball(tau), params, 0).unwrap();
        let q = m.predict(&[0.0]);
        prop_assert!((0..n).all(|i| m.predict(&[i as f64]) == q));
        let loss = |c: f64| y.iter().map(|&v| pinball_loss(tau, v, c)).sum::<f64>();
        let best = y.iter().map(|&c| loss(c)).fold(f64::INFINITY, f64::min);
        prop_assert!(loss(q) <= best + 1e-9 * best.abs().max(1.0));
        prop_assert!(y.contains(&q));
    }

    #[test]
    fn sharpening_keeps_the_argmax(raw in prop::collection::vec(0.0f64..5.0, 200), alpha in 0.1f64..4.0) {
        prop_assume!(raw.iter().any(|v| *v > 0.0));
        let grid = EvalGrid::new(0.0, 1.0).unwrap();
        let d = GridDensity::normalized(grid, raw).unwrap();
        let s = d.sharpen(alpha).unwrap();
        let argmax = |g: &GridDensity| {
            let m = g.values().iter().copied().fold(f64::MIN, f64::max);
            g.values().iter().enumerate().filter(|(_, v)| **v == m).map(|(i, _)| i).collect::<Vec<_>>()
        };
        prop_assert_eq!(argmax(&d), argmax(&s));
    }

    #[test]
    fn cosine_basis_is_orthonormal(i in 0usize..31, j in 0usize..31) {
        let n = 200;
        let h = 1.0 / (n - 1) as f64;
        let f = |k: usize| CosineBasis::phi(i, k as f64 * h) * CosineBasis::phi(j, k as f64 * h);
        let integral = h * ((1..n - 1).map(f).sum::<f64>() + 0.5 * (f(0) + f(n - 1)));
        let delta = if i == j { 1.0 } else { 0.0 };
        prop_assert!((integral - delta).abs() < 1e-3, "{} {} {}", i, j, integral);
    }
}
