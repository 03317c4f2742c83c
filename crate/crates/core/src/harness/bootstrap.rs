use rand::Rng;

use crate::error::{CpteError, Result};
use crate::rng::rng_from;
use crate::stats::empirical_quantile;

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], b: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(CpteError::InvalidInput("bootstrap needs at least 2 values".into()));
    }
    if b == 0 || !(level > 0.0 && level < 1.0) {
        return Err(CpteError::InvalidInput("bootstrap needs B >= 1 and level in (0, 1)".into()));
    }
    let n = values.len();
    let mut rng = rng_from(seed);
    let mut means: Vec<f64> = (0..b)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        empirical_quantile(&means, alpha / 2.0).clamp(lo, hi),
        empirical_quantile(&means, 1.0 - alpha / 2.0).clamp(lo, hi),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_values() {
        let (lo, hi) = bootstrap_ci(&[0.3; 10], 200, 0.95, 1).unwrap();
        assert_eq!((lo, hi), (0.3, 0.3));
    }

    #[test]
    fn binary_values_cover_half() {
        let v: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, 10_000, 0.95, 2).unwrap();
        assert!(lo < 0.5 && 0.5 < hi);
    }

    #[test]
    fn width_shrinks_with_more_values() {
        let mut rng = rng_from(3);
        let (mut w10, mut w50) = (0.0, 0.0);
        for s in 0..20 {
            let v: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
            let a = bootstrap_ci(&v[..10], 1000, 0.95, s).unwrap();
            let b = bootstrap_ci(&v, 1000, 0.95, s).unwrap();
            w10 += a.1 - a.0;
            w50 += b.1 - b.0;
        }
        assert!(w10 > w50);
    }

    #[test]
    fn too_few_values() {
        assert!(bootstrap_ci(&[1.0], 10, 0.95, 0).is_err());
    }
}
