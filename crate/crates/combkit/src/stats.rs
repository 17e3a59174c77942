//! Pearson chi-square against the uniform law and bootstrap intervals.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Tests `observed` category counts against equal expected frequencies.
/// Returns `None` with fewer than two categories or no observations.
pub fn chi_square_uniform(observed: &[u64]) -> Option<ChiSquare> {
    chi_square_sparse(observed, observed.len() as u64)
}

/// Like [`chi_square_uniform`] over `categories` cells, of which only the
/// observed ones are listed; the rest count as zero.
pub fn chi_square_sparse(observed: &[u64], categories: u64) -> Option<ChiSquare> {
    let k = categories;
    let total: u64 = observed.iter().sum();
    if k < 2 || total == 0 || (observed.len() as u64) > k {
        return None;
    }
    let expected = total as f64 / k as f64;
    let unseen = (k - observed.len() as u64) as f64 * expected;
    let statistic = observed.iter().map(|o| (*o as f64 - expected).powi(2) / expected).sum::<f64>() + unseen;
    let df = k - 1;
    let p_value = ChiSquared::new(df as f64).ok()?.sf(statistic);
    Some(ChiSquare { statistic, df, p_value })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile bootstrap confidence interval of the mean.
pub fn bootstrap_mean_ci(xs: &[f64], level: f64, resamples: usize, seed: u64) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..xs.len()).map(|_| xs[rng.gen_range(0..xs.len())]).sum::<f64>() / xs.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64) as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_uniform_counts() {
        let c = chi_square_uniform(&[100, 100, 100]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.df, 2);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert!(chi_square_uniform(&[5]).is_none());
        let sparse = chi_square_sparse(&[100, 100], 3).unwrap();
        assert_eq!(sparse, chi_square_uniform(&[100, 100, 0]).unwrap());
    }

    #[test]
    fn skewed_counts_are_rejected() {
        // chi2 = 2·(50²/500) = 10 with one degree of freedom.
        let c = chi_square_uniform(&[450, 550]).unwrap();
        assert!((c.statistic - 10.0).abs() < 1e-12);
        assert!((c.p_value - 0.001_565_3).abs() < 1e-6, "{}", c.p_value);
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let xs: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let (lo, hi) = bootstrap_mean_ci(&xs, 0.95, 2000, 1);
        assert!(lo < 4.5 && 4.5 < hi && hi - lo < 1.5);
    }
}
