#![allow(dead_code)]

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn phi(x: f64) -> f64 {
    Normal::standard().pdf(x)
}

pub fn big_phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// CRPS of N(mean, sd) at y by brute-force quadrature of
/// ∫ (F(t) − 1{t ≥ y})² dt over mean ± 12 sd.
pub fn gaussian_crps_quadrature(y: f64, mean: f64, sd: f64) -> f64 {
    let (a, b) = (mean - 12.0 * sd, mean + 12.0 * sd);
    let n = 200_000;
    let h = (b - a) / n as f64;
    let f = |t: f64| {
        let step = if t >= y { 1.0 } else { 0.0 };
        (big_phi((t - mean) / sd) - step).powi(2)
    };
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Central finite-difference gradient with step `1e-5 · max(1, |p|)`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = 1e-5 * p[i].abs().max(1.0);
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// max_i |a_i − b_i| / max(|b_i|, floor)
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. `a` is row-major `n × n`.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            b.swap(c, piv);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x
}
