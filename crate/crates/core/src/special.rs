//! Scalar densities and distribution functions used by the estimators,
//! the synthetic generators and the metric code.

use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    std_normal_cdf((x - mean) / sd)
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley step, which brings
/// the result to near machine precision over (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p_low = 0.024_25;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Log density of a location-scale Student-t distribution.
pub fn student_t_ln_pdf(x: f64, loc: f64, scale: f64, nu: f64) -> f64 {
    let z = (x - loc) / scale;
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI).ln()
        - scale.ln()
        - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
}

/// Log density of Gamma(shape, scale) at `x > 0`; `-inf` elsewhere.
pub fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Closed-form CRPS of a normal forecast against outcome `y`.
pub fn normal_crps(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    sd * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z, 0.0, 1.0) - 1.0 / PI.sqrt())
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > t) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // the alternating series converges slowly here and the value is 1 to
        // double precision
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS distance `d` computed from `m`
/// observations, with the usual small-sample correction of the argument.
pub fn ks_pvalue(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    kolmogorov_sf((sm + 0.12 + 0.11 / sm) * d)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln Σ exp(v_i)` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.02, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-13 * (1.0 + 1.0 / p), "p = {p}");
        }
        assert_eq!(std_normal_quantile(0.5), 0.0);
    }

    #[test]
    fn gaussian_crps_at_mean() {
        let expected = 2.0 * normal_pdf(0.0, 0.0, 1.0) - 1.0 / PI.sqrt();
        assert!((normal_crps(0.0, 0.0, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.233_695_2).abs() < 1e-6);
    }

    #[test]
    fn t_density_approaches_normal() {
        let t = student_t_ln_pdf(0.7, 0.0, 1.0, 1e7).exp();
        let n = normal_pdf(0.7, 0.0, 1.0);
        assert!((t - n).abs() < 1e-6);
    }

    #[test]
    fn kolmogorov_known_values() {
        // P(K > 1.358) is the classic 5% critical value
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.627_6) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn gamma_density_integrates() {
        let (shape, scale) = (3.0, 0.5);
        let h = 1e-3;
        let total: f64 = (1..20_000).map(|i| gamma_ln_pdf(i as f64 * h, shape, scale).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-4);
    }
}
