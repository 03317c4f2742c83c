use rand::seq::SliceRandom;

use crate::data::Matrix;
use crate::error::{CpteError, Result};
use crate::rng::rng_from;
use crate::stats::{normal_quantile, pearson};

/// Reorders the rows of each column of an `n×2` sample so the pair's rank
/// correlation approaches `target_rho`. Each output column is a permutation of
/// the corresponding input column.
///
/// Scores are van der Waerden scores `Φ⁻¹(i/(n+1))`, independently shuffled per
/// column. With `E = F Fᵀ` the score correlation and `C = P Pᵀ` the target,
/// `T = S (P F⁻¹)ᵀ` has correlation `C`, and each input column is sorted and
/// laid out in the rank order of the matching column of `T`.
pub fn iman_conover(samples: &Matrix, target_rho: f64, seed: u64) -> Result<Matrix> {
    let n = samples.nrows();
    if samples.ncols() != 2 {
        return Err(CpteError::DimensionMismatch {
            expected: 2,
            got: samples.ncols(),
        });
    }
    if n < 10 {
        return Err(CpteError::InvalidInput(
            "iman_conover needs at least 10 rows".into(),
        ));
    }
    if !(target_rho.abs() < 1.0) {
        return Err(CpteError::InvalidInput(
            "target correlation must lie in (-1, 1)".into(),
        ));
    }
    let cols: Vec<Vec<f64>> = (0..2).map(|j| samples.column(j)).collect();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|&v| v == c[0]) {
            return Err(CpteError::ConstantColumn { column: j });
        }
    }

    let scores: Vec<f64> = (1..=n)
        .map(|i| normal_quantile(i as f64 / (n + 1) as f64))
        .collect();
    let mut rng = rng_from(seed);
    let mut s0 = scores.clone();
    let mut s1 = scores;
    s0.shuffle(&mut rng);
    s1.shuffle(&mut rng);

    // 2×2 Cholesky factors are lower-triangular [[1, 0], [r, sqrt(1 - r²)]]
    let e = pearson(&s0, &s1).clamp(-0.999_999, 0.999_999);
    let fe = (1.0 - e * e).sqrt();
    let fc = (1.0 - target_rho * target_rho).sqrt();
    // row vector s ↦ s · (P F⁻¹)ᵀ; F⁻¹ = [[1, 0], [-e/fe, 1/fe]]
    let t1: Vec<f64> = s0
        .iter()
        .zip(&s1)
        .map(|(&a, &b)| {
            let g1 = (b - e * a) / fe;
            target_rho * a + fc * g1
        })
        .collect();
    let t0 = s0;

    let mut out = Matrix::zeros(n, 2);
    for (j, (col, t)) in cols.iter().zip([&t0, &t1]).enumerate() {
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
        for (rank, &row) in order.iter().enumerate() {
            out.set(row, j, sorted[rank]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::spearman;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample(n: usize, seed: u64) -> Matrix {
        let mut rng = rng_from(seed);
        let data: Vec<f64> = (0..2 * n)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                if i % 2 == 0 { z } else { z.exp() }
            })
            .collect();
        Matrix::from_vec(data, 2).unwrap()
    }

    fn sorted_column(m: &Matrix, j: usize) -> Vec<f64> {
        let mut c = m.column(j);
        c.sort_by(f64::total_cmp);
        c
    }

    #[test]
    fn preserves_multisets() {
        let m = sample(500, 1);
        for rho in [0.0, 0.5, -0.8] {
            let out = iman_conover(&m, rho, 9).unwrap();
            for j in 0..2 {
                assert_eq!(sorted_column(&m, j), sorted_column(&out, j));
            }
        }
    }

    #[test]
    fn strong_target_is_reached() {
        let m = sample(1000, 2);
        let out = iman_conover(&m, 0.999, 3).unwrap();
        let r = spearman(&out.column(0), &out.column(1));
        assert!(r > 0.95, "{r}");
        let out = iman_conover(&m, -0.6, 3).unwrap();
        let r = spearman(&out.column(0), &out.column(1));
        assert!((r + 0.6).abs() < 0.05, "{r}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = sample(20, 4);
        assert!(iman_conover(&Matrix::zeros(5, 2), 0.5, 0).is_err());
        for i in 0..20 {
            m.set(i, 1, 3.0);
        }
        assert!(matches!(
            iman_conover(&m, 0.5, 0),
            Err(CpteError::ConstantColumn { column: 1 })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = sample(100, 5);
        assert_eq!(iman_conover(&m, 0.4, 8).unwrap(), iman_conover(&m, 0.4, 8).unwrap());
    }
}
