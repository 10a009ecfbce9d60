//! One-sided Welch tests on per-method summary statistics and Holm's
//! step-down correction.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Probability of a gap this large in favour of the foundation method
    /// under the null of no difference.
    pub p: f64,
}

/// Tests whether the foundation method F beats competitor C, given the
/// mean, standard error of the mean and number of reps for each.
pub fn welch_one_sided(
    mean_f: f64,
    se_f: f64,
    n_f: usize,
    mean_c: f64,
    se_c: f64,
    n_c: usize,
    direction: Direction,
) -> Result<WelchResult> {
    let vals = [mean_f, se_f, mean_c, se_c];
    if vals.iter().any(|v| !v.is_finite()) || se_f < 0.0 || se_c < 0.0 {
        return Err(HarnessError::invalid("Welch test needs finite means and non-negative standard errors"));
    }
    if se_f == 0.0 && se_c == 0.0 {
        return Err(HarnessError::invalid("Welch test undefined: both standard errors are zero"));
    }
    if n_f < 2 || n_c < 2 {
        return Err(HarnessError::invalid("Welch test needs at least 2 reps per method"));
    }
    let (vf, vc) = (se_f * se_f, se_c * se_c);
    let gap = match direction {
        Direction::LowerIsBetter => mean_c - mean_f,
        Direction::HigherIsBetter => mean_f - mean_c,
    };
    let t = gap / (vf + vc).sqrt();
    let df = (vf + vc).powi(2) / (vf * vf / (n_f - 1) as f64 + vc * vc / (n_c - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| HarnessError::invalid(format!("t distribution: {e}")))?;
    Ok(WelchResult { t, df, p: dist.sf(t).clamp(0.0, 1.0) })
}

/// Holm's step-down procedure; returns one rejection flag per p-value in
/// input order.
pub fn holm_bonferroni(pvalues: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if pvalues.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(HarnessError::invalid("p-values must lie in [0, 1]"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(HarnessError::invalid("alpha must lie in (0, 1)"));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut reject = vec![false; m];
    for (i, &k) in order.iter().enumerate() {
        if pvalues[k] > alpha / (m - i) as f64 {
            break;
        }
        reject[k] = true;
    }
    Ok(reject)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Upper tail of Student's t by Simpson integration of the density from
    /// t to a far cutoff, with the normalizing constant from ln Γ.
    fn t_upper_tail(t: f64, df: f64) -> f64 {
        let ln_c = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        let (a, b, n) = (t, 2000.0, 2_000_000);
        let h = (b - a) / n as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn worked_example() {
        let r = welch_one_sided(-1.0, 0.02, 5, -0.9, 0.02, 5, Direction::LowerIsBetter).unwrap();
        let t_oracle = 0.1 / (2.0f64 * 0.0004).sqrt();
        assert!((r.t - t_oracle).abs() < 1e-12);
        assert!((r.t - 3.536).abs() < 1e-3);
        assert!((r.df - 8.0).abs() < 1e-12);
        let p_oracle = t_upper_tail(t_oracle, 8.0);
        assert!((r.p - p_oracle).abs() < 1e-6, "{} vs {}", r.p, p_oracle);
        assert!((r.p - 0.0038).abs() < 1e-3);
    }

    #[test]
    fn equal_means_give_half() {
        for dir in [Direction::LowerIsBetter, Direction::HigherIsBetter] {
            let r = welch_one_sided(1.0, 0.1, 5, 1.0, 0.3, 7, dir).unwrap();
            assert_eq!(r.t, 0.0);
            assert!((r.p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_mirrors() {
        let lo = welch_one_sided(-1.0, 0.02, 5, -0.9, 0.03, 5, Direction::LowerIsBetter).unwrap();
        let hi = welch_one_sided(-0.9, 0.02, 5, -1.0, 0.03, 5, Direction::HigherIsBetter).unwrap();
        assert!((lo.t - hi.t).abs() < 1e-12 && (lo.p - hi.p).abs() < 1e-12);
        assert!(lo.p < 0.5);
    }

    #[test]
    fn huge_competitor_se_tends_to_half() {
        let a = welch_one_sided(0.0, 0.01, 5, 0.1, 10.0, 5, Direction::LowerIsBetter).unwrap();
        let b = welch_one_sided(0.0, 0.01, 5, -0.1, 10.0, 5, Direction::LowerIsBetter).unwrap();
        assert!(a.p < 0.5 && a.p > 0.49);
        assert!(b.p > 0.5 && b.p < 0.51);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(welch_one_sided(0.0, 0.0, 5, 1.0, 0.0, 5, Direction::LowerIsBetter).is_err());
        assert!(welch_one_sided(0.0, -0.1, 5, 1.0, 0.1, 5, Direction::LowerIsBetter).is_err());
        assert!(welch_one_sided(0.0, 0.1, 1, 1.0, 0.1, 5, Direction::LowerIsBetter).is_err());
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04, 0.03], 0.1).unwrap(), [true, true, true]);
        assert_eq!(holm_bonferroni(&[0.2], 0.1).unwrap(), [false]);
        assert_eq!(holm_bonferroni(&[0.03, 0.06], 0.1).unwrap(), [true, true]);
        assert_eq!(holm_bonferroni(&[0.06, 0.04], 0.1).unwrap(), [true, true]);
        assert_eq!(holm_bonferroni(&[0.06, 0.07], 0.1).unwrap(), [false, false]);
        assert!(holm_bonferroni(&[], 0.1).unwrap().is_empty());
        assert!(holm_bonferroni(&[1.5], 0.1).is_err());
    }

    /// Closed testing with Bonferroni local tests: H_i is rejected iff every
    /// intersection hypothesis containing it has min p ≤ α/|S|.
    fn closed_testing(p: &[f64], alpha: f64) -> Vec<bool> {
        let m = p.len();
        (0..m)
            .map(|i| {
                (1u32..1 << m).filter(|s| s & (1 << i) != 0).all(|s| {
                    let size = s.count_ones() as f64;
                    (0..m).filter(|j| s & (1 << j) != 0).any(|j| p[j] <= alpha / size)
                })
            })
            .collect()
    }

    proptest! {
        #[test]
        fn holm_equals_closed_testing(
            p in proptest::collection::vec(prop_oneof![0.0..1.0f64, (0u32..7).prop_map(|k| k as f64 * 0.025)], 1..=6),
            alpha in prop_oneof![Just(0.1), Just(0.05), 0.01..0.5f64],
        ) {
            prop_assert_eq!(holm_bonferroni(&p, alpha).unwrap(), closed_testing(&p, alpha));
        }

        #[test]
        fn welch_p_monotone(gap in 0.0..1.0f64, extra in 0.001..1.0f64, se in 0.01..0.5f64, more in 0.001..0.5f64) {
            let p = |g: f64, s: f64| welch_one_sided(0.0, s, 5, g, s, 5, Direction::LowerIsBetter).unwrap().p;
            prop_assert!(p(gap + extra, se) <= p(gap, se));
            prop_assert!(p(gap, se + more) >= p(gap, se) - 1e-15);
        }
    }
}
