mod common;

use cde_core::dgp::SyntheticDgp;
use cde_core::encoding::bar_to_density;
use cde_core::neural::{
    catmlp_density, catmlp_fit, catmlp_objective, mdn_density, mdn_fit, mdn_loss, mdn_objective, CatMlpConfig, MdnConfig,
    MdnMixture, Mlp, TrainConfig,
};
use cde_core::{make_eval_grid, BarDistribution, ConditionalDensity, Dataset, EvalGrid};
use common::fd_grad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Normal};

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)
fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}

fn random_instance(rng: &mut ChaCha8Rng, sizes: Vec<usize>, rows: usize) -> (Mlp, Vec<f64>, Vec<f64>) {
    let mlp = Mlp::new(sizes).unwrap();
    let params: Vec<f64> = mlp.init(rng).into_iter().map(|p| p + rng.random_range(-0.2..0.2)).collect();
    let x: Vec<f64> = (0..rows * mlp.n_inputs()).map(|_| rng.random_range(-2.0..2.0)).collect();
    (mlp, params, x)
}

#[test]
fn mdn_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..20 {
        let d = 1 + trial % 4;
        let k = 1 + trial % 3;
        let rows = 10;
        let (mlp, params, x) = random_instance(&mut rng, vec![d, 5, 3 * k], rows);
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, grad) = mdn_objective(&mlp, &params, &x, &y, k);
        let fd = fd_grad(|p| mdn_objective(&mlp, p, &x, &y, k).0, &params);
        let err = norm_rel_err(&grad, &fd);
        assert!(err < 1e-4, "trial {trial}: {err}");
    }
}

#[test]
fn catmlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let d = 1 + trial % 4;
        let bins = 3 + trial % 5;
        let rows = 10;
        let (mlp, params, x) = random_instance(&mut rng, vec![d, 5, 5, bins], rows);
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..bins)).collect();
        let (_, grad) = catmlp_objective(&mlp, &params, &x, &labels);
        let fd = fd_grad(|p| catmlp_objective(&mlp, p, &x, &labels).0, &params);
        let err = norm_rel_err(&grad, &fd);
        assert!(err < 1e-4, "trial {trial}: {err}");
    }
}

#[test]
fn single_component_mdn_is_a_gaussian_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = 25;
    let outputs: Vec<f64> = (0..3 * rows).map(|_| rng.random_range(-1.5..1.5)).collect();
    let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..3.0)).collect();
    let want = -(0..rows)
        .map(|i| Normal::new(outputs[3 * i + 1], outputs[3 * i + 2].exp()).unwrap().ln_pdf(y[i]))
        .sum::<f64>()
        / rows as f64;
    assert!((mdn_loss(&outputs, &y, 1, None) - want).abs() < 1e-12);
}

/// Mass of the mixture inside `[lo, hi]` and the mean of its restriction
/// there, by a fine trapezoid rule.
fn truncated_moments(mix: &MdnMixture, lo: f64, hi: f64) -> (f64, f64) {
    let n = 100_000;
    let h = (hi - lo) / n as f64;
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..=n {
        let t = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        m0 += w * mix.pdf(t);
        m1 += w * t * mix.pdf(t);
    }
    (m0, m1 / m0)
}

#[test]
fn mixture_identities() {
    let one_hot = MdnMixture { weights: vec![1.0, 0.0], means: vec![0.3, 5.0], sds: vec![0.7, 1.0] };
    let n = Normal::new(0.3, 0.7).unwrap();
    for y in [-1.0, 0.3, 2.0] {
        assert!((one_hot.pdf(y) - n.pdf(y)).abs() < 1e-14);
    }

    let ds = SyntheticDgp::Bimodal.simulate(500, 4).unwrap();
    let fit = mdn_fit(&ds, &MdnConfig::default()).unwrap();
    let grid = make_eval_grid(&ds.response).unwrap();
    for row in ds.features.iter_rows().take(20) {
        let mix = fit.mixture(row).unwrap();
        assert!((mix.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let d = mdn_density(&fit, row, &grid).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-6);
        let (mass, truncated_mean) = truncated_moments(&mix, grid.lo(), grid.hi());
        assert!((d.mean() - truncated_mean).abs() < 1e-3, "{} vs {truncated_mean}", d.mean());
        if mass > 0.999 {
            assert!((d.mean() - mix.mean()).abs() < 1e-2, "{} vs {}", d.mean(), mix.mean());
        }
    }
}

#[test]
fn one_hot_bars_become_a_triangular_bump() {
    let edges: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let mut masses = vec![0.0; 10];
    masses[4] = 1.0;
    let grid = EvalGrid::new(0.0, 10.0).unwrap();
    let d = bar_to_density(&BarDistribution::new(edges, masses).unwrap(), &grid).unwrap();
    assert!((d.integral() - 1.0).abs() < 1e-9);
    let center = 4.5;
    let peak = (0..grid.len()).max_by(|&a, &b| d.values()[a].total_cmp(&d.values()[b])).unwrap();
    assert!((grid.point(peak) - center).abs() <= grid.step());
    for i in 0..grid.len() {
        let t = grid.point(i);
        if (t - center).abs() >= 1.0 {
            assert_eq!(d.values()[i], 0.0, "t = {t}");
        }
        if i > 0 && t <= center {
            assert!(d.values()[i] >= d.values()[i - 1]);
        }
        if i > 0 && grid.point(i - 1) >= center {
            assert!(d.values()[i] <= d.values()[i - 1]);
        }
    }
}

#[test]
fn catmlp_learns_a_three_value_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 300;
    let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|i| if x[2 * i] < -0.3 { 0.0 } else if x[2 * i] < 0.3 { 1.0 } else { 2.0 }).collect();
    let ds = Dataset::unnamed(cde_core::linalg::Matrix::from_vec(n, 2, x).unwrap(), y).unwrap();
    let fit = catmlp_fit(&ds, &CatMlpConfig { n_bins: 50, hidden: 32, ..CatMlpConfig::default() }).unwrap();
    // 0, 1 and 2 land in bins 0, 25 and 49 of [0, 2]
    let support = [0usize, 25, 49];
    let mut mass = 0.0;
    for row in ds.features.iter_rows().take(50) {
        let p = fit.probabilities(row).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        mass += support.iter().map(|&b| p[b]).sum::<f64>();
    }
    assert!(mass / 50.0 > 0.9, "{}", mass / 50.0);

    let grid = make_eval_grid(&ds.response).unwrap();
    for row in ds.features.iter_rows().take(10) {
        assert!((catmlp_density(&fit, row, &grid).unwrap().integral() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn catmlp_refuses_a_single_value_response() {
    let ds = Dataset::unnamed(cde_core::linalg::Matrix::zeros(30, 1), vec![1.0; 30]).unwrap();
    assert!(catmlp_fit(&ds, &CatMlpConfig::default()).is_err());
}

#[test]
fn early_stopping_keeps_the_best_weights_and_training_is_reproducible() {
    let ds = SyntheticDgp::hetero_gaussian().simulate(400, 6).unwrap();
    let train = TrainConfig { max_epochs: 150, seed: 9, ..TrainConfig::default() };
    let mdn = MdnConfig { components: 2, hidden: 8, train };
    let a = mdn_fit(&ds, &mdn).unwrap();
    assert!(a.report().best_val_loss <= a.report().first_val_loss);
    assert!(a.report().best_epoch <= a.report().epochs_run);
    assert_eq!(a, mdn_fit(&ds, &mdn).unwrap());
    let other_seed = mdn_fit(&ds, &MdnConfig { train: TrainConfig { seed: 10, ..train }, ..mdn }).unwrap();
    assert_ne!(a, other_seed);

    let cat = CatMlpConfig { n_bins: 30, hidden: 8, train };
    let c = catmlp_fit(&ds, &cat).unwrap();
    assert!(c.report().best_val_loss <= c.report().first_val_loss);
    assert_eq!(c, catmlp_fit(&ds, &cat).unwrap());

    let grid = make_eval_grid(&ds.response).unwrap();
    assert!(a.density(&[0.0, 0.0], &grid).is_err());
    assert!(c.density(&[0.0], &grid).is_err());
}
