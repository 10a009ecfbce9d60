//! Limited-memory BFGS with a strong-Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::linalg::{axpy, dot};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    /// Converged once `‖∇f‖∞` drops below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { max_iter: 500, grad_tol: 1e-6, memory: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which writes its gradient into the second argument and
/// returns the objective value. Always returns the best iterate seen.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: LbfgsConfig) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut restarted = false;

    while iterations < cfg.max_iter {
        if inf_norm(&g) <= cfg.grad_tol {
            return Minimum { grad_inf_norm: inf_norm(&g), x, value: fx, iterations, converged: true };
        }
        iterations += 1;
        let dir = two_loop(&g, &hist);
        let mut slope = dot(&dir, &g);
        let dir = if slope < 0.0 {
            dir
        } else {
            hist.clear();
            let d: Vec<f64> = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
            d
        };
        let init_step = if hist.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        match wolfe_search(&mut f, &x, fx, &g, &dir, slope, init_step) {
            Some((step, f_new, g_new)) => {
                let s: Vec<f64> = dir.iter().map(|d| step * d).collect();
                let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &yv);
                axpy(1.0, &s, &mut x);
                fx = f_new;
                g = g_new;
                if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
                    if hist.len() == cfg.memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, yv, 1.0 / sy));
                }
                restarted = false;
            }
            None => {
                if restarted || hist.is_empty() {
                    break;
                }
                hist.clear();
                restarted = true;
            }
        }
    }
    let gn = inf_norm(&g);
    Minimum { converged: gn <= cfg.grad_tol, grad_inf_norm: gn, x, value: fx, iterations }
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        for v in q.iter_mut() {
            *v *= gamma;
        }
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    for v in q.iter_mut() {
        *v = -*v;
    }
    q
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong-Wolfe line search (bracketing followed by zoom). Returns the step,
/// the new value and the new gradient.
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    slope0: f64,
    init_step: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let _ = g0;
    let n = x.len();
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut eval = |step: f64, xt: &mut Vec<f64>, gt: &mut Vec<f64>| -> (f64, f64) {
        for i in 0..n {
            xt[i] = x[i] + step * dir[i];
        }
        let v = f(xt, gt);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        (v, dot(gt, dir))
    };

    let mut prev = (0.0, f0, slope0);
    let mut step = init_step;
    for i in 0..40 {
        let (fv, sl) = eval(step, &mut xt, &mut gt);
        if fv > f0 + C1 * step * slope0 || (i > 0 && fv >= prev.1) || !fv.is_finite() {
            return zoom(&mut eval, f0, slope0, prev, (step, fv, sl), &mut xt, &mut gt);
        }
        if sl.abs() <= -C2 * slope0 {
            return Some((step, fv, gt));
        }
        if sl >= 0.0 {
            return zoom(&mut eval, f0, slope0, (step, fv, sl), prev, &mut xt, &mut gt);
        }
        prev = (step, fv, sl);
        step *= 2.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    eval: &mut E,
    f0: f64,
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    xt: &mut Vec<f64>,
    gt: &mut Vec<f64>,
) -> Option<(f64, f64, Vec<f64>)>
where
    E: FnMut(f64, &mut Vec<f64>, &mut Vec<f64>) -> (f64, f64),
{
    for _ in 0..60 {
        let step = interpolate_step(lo, hi);
        let (fv, sl) = eval(step, xt, gt);
        if fv > f0 + C1 * step * slope0 || fv >= lo.1 {
            hi = (step, fv, sl);
        } else {
            if sl.abs() <= -C2 * slope0 {
                return Some((step, fv, gt.clone()));
            }
            if sl * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (step, fv, sl);
        }
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
    }
    // accept a sufficient-decrease step even without the curvature condition
    if lo.0 > 0.0 && lo.1 < f0 {
        let (fv, _) = eval(lo.0, xt, gt);
        return Some((lo.0, fv, gt.clone()));
    }
    None
}

/// Minimizer of the cubic through both end points, safeguarded to the
/// middle 80% of the bracket; bisection when the cubic is unusable.
fn interpolate_step(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
    let width = hi.0 - lo.0;
    let mid = 0.5 * (lo.0 + hi.0);
    if !hi.1.is_finite() || !lo.1.is_finite() {
        return mid;
    }
    let d1 = lo.2 + hi.2 - 3.0 * (lo.1 - hi.1) / (lo.0 - hi.0);
    let disc = d1 * d1 - lo.2 * hi.2;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt();
    let t = hi.0 - width * (hi.2 + d2 - d1) / (hi.2 - lo.2 + 2.0 * d2);
    if !t.is_finite() {
        return mid;
    }
    t.clamp(lo.0 + 0.1 * width, hi.0 - 0.1 * width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let m = minimize(f, &[-1.2, 1.0], LbfgsConfig { grad_tol: 1e-9, ..Default::default() });
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_many_dims() {
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let w = (i + 1) as f64;
                g[i] = 2.0 * w * (x[i] - 1.0);
                v += w * (x[i] - 1.0).powi(2);
            }
            v
        };
        let m = minimize(f, &[0.0; 12], LbfgsConfig::default());
        assert!(m.converged);
        assert!(m.x.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }
}
