//! Monte Carlo estimates with jackknife standard errors.

use crate::numeric::pairwise_sum;

/// A Monte Carlo estimate: value, jackknife standard error, and the number
/// of replications it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub replications: usize,
}

/// Mean of per-replication values with the leave-one-out jackknife
/// standard error (for the mean this equals the classical `s / sqrt(R)`).
pub fn mc_estimate(vals: &[f64]) -> Estimate {
    let r = vals.len();
    if r == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN, replications: 0 };
    }
    let total = pairwise_sum(vals);
    let mean = total / r as f64;
    if r == 1 {
        return Estimate { value: mean, stderr: 0.0, replications: 1 };
    }
    // leave-one-out means
    let loo: Vec<f64> = vals.iter().map(|v| (total - v) / (r as f64 - 1.0)).collect();
    let loo_mean = pairwise_sum(&loo) / r as f64;
    let ss = pairwise_sum(&loo.iter().map(|l| (l - loo_mean) * (l - loo_mean)).collect::<Vec<_>>());
    let stderr = ((r as f64 - 1.0) / r as f64 * ss).sqrt();
    Estimate { value: mean, stderr, replications: r }
}

/// Standard error of a difference of independent estimates.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jackknife_equals_classical_se_for_mean() {
        let vals: Vec<f64> = (0..500).map(|i| ((i * 17) % 31) as f64 * 0.1).collect();
        let est = mc_estimate(&vals);
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() as f64 - 1.0);
        let se = (var / vals.len() as f64).sqrt();
        assert_relative_eq!(est.value, mean, max_relative = 1e-12);
        assert_relative_eq!(est.stderr, se, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_cases() {
        let est = mc_estimate(&[2.5]);
        assert_eq!(est.value, 2.5);
        assert_eq!(est.stderr, 0.0);
        let est = mc_estimate(&[1.0, 1.0, 1.0]);
        assert_eq!(est.value, 1.0);
        assert_eq!(est.stderr, 0.0);
    }
}
