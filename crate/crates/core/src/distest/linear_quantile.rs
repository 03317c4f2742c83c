use serde::{Deserialize, Serialize};

use super::QuantileModel;
use crate::data::{Arm, Dataset};
use crate::error::{CpteError, Result};
use crate::linalg::SymSystem;
use crate::stats::{empirical_quantile, interp_linear};

/// `ρ_q(r) = r (q − 1{r < 0})`.
#[inline]
pub fn pinball_loss(r: f64, q: f64) -> f64 {
    if r < 0.0 {
        r * (q - 1.0)
    } else {
        r * q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantileParams {
    pub levels: Vec<f64>,
    /// Relative loss change below which an iteration stage stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl LinearQuantileParams {
    /// `count` equispaced levels strictly inside (0, 1).
    pub fn with_levels(count: usize) -> Self {
        let levels = (1..=count).map(|k| k as f64 / (count + 1) as f64).collect();
        Self {
            levels,
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

impl Default for LinearQuantileParams {
    fn default() -> Self {
        Self::with_levels(99)
    }
}

/// Linear conditional quantiles on a fixed level grid. Row `k` of `coef` holds
/// `[intercept, slopes…]` for `levels[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantileModel {
    pub levels: Vec<f64>,
    pub coef: Vec<Vec<f64>>,
}

impl LinearQuantileModel {
    /// Raw fitted value for level index `k`.
    pub fn fitted(&self, x: &[f64], k: usize) -> f64 {
        let b = &self.coef[k];
        b[0] + x.iter().zip(&b[1..]).map(|(a, c)| a * c).sum::<f64>()
    }

    /// Fitted values on the level grid, sorted so quantile curves never cross.
    pub fn grid_values(&self, x: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.levels.len()).map(|k| self.fitted(x, k)).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

impl QuantileModel for LinearQuantileModel {
    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>> {
        let v = self.grid_values(x);
        vec![levels.iter().map(|&q| interp_linear(&self.levels, &v, q)).collect()]
    }

    fn summary(&self) -> String {
        let mid = self.levels.len() / 2;
        format!(
            "linear_quantile levels={} median_coef={:?}",
            self.levels.len(),
            self.coef[mid]
        )
    }
}

/// Fits per-level linear quantile regressions of outcome coordinate `component`
/// on the units of `arm`, by majorize–minimize iteratively reweighted least
/// squares with a shrinking perturbation, warm-started across levels.
pub fn fit_linear_quantile(
    data: &Dataset,
    arm: Arm,
    component: usize,
    params: &LinearQuantileParams,
) -> Result<LinearQuantileModel> {
    if params.levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) || params.levels.is_empty() {
        return Err(CpteError::InvalidInput("quantile levels must lie in (0, 1)".into()));
    }
    let idx = data.arm_indices(arm);
    if idx.is_empty() {
        return Err(CpteError::EmptyArm { arm: arm.index() as u8 });
    }
    let p = data.n_features() + 1;
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let mut z = Vec::with_capacity(p);
            z.push(1.0);
            z.extend_from_slice(data.x.row(i));
            z
        })
        .collect();
    let y: Vec<f64> = idx.iter().map(|&i| data.y.get(i, component)).collect();
    let mut levels = params.levels.clone();
    levels.sort_by(f64::total_cmp);

    let mut sorted_y = y.clone();
    sorted_y.sort_by(f64::total_cmp);
    if sorted_y[0] == sorted_y[sorted_y.len() - 1] {
        let mut b = vec![0.0; p];
        b[0] = sorted_y[0];
        return Ok(LinearQuantileModel {
            coef: vec![b; levels.len()],
            levels,
        });
    }
    let med = empirical_quantile(&sorted_y, 0.5);
    let scale = (y.iter().map(|v| (v - med).abs()).sum::<f64>() / y.len() as f64).max(1e-12);

    // least-squares start, intercept shifted to the residual quantile of the first level
    let mut sys = SymSystem::zeros(p);
    for (z, &t) in rows.iter().zip(&y) {
        sys.add_outer(z, 1.0, t);
    }
    let mut beta = sys.solve()?;
    let mut resid: Vec<f64> = rows.iter().zip(&y).map(|(z, &t)| t - dot(z, &beta)).collect();
    resid.sort_by(f64::total_cmp);
    beta[0] += empirical_quantile(&resid, levels[0]);

    let mut coef = Vec::with_capacity(levels.len());
    for &q in &levels {
        beta = mm_level(&rows, &y, q, beta, scale, params, &mut sys)?;
        coef.push(beta.clone());
    }
    Ok(LinearQuantileModel { levels, coef })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn total_loss(rows: &[Vec<f64>], y: &[f64], beta: &[f64], q: f64) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(z, &t)| pinball_loss(t - dot(z, beta), q))
        .sum()
}

fn mm_level(
    rows: &[Vec<f64>],
    y: &[f64],
    q: f64,
    start: Vec<f64>,
    scale: f64,
    params: &LinearQuantileParams,
    sys: &mut SymSystem,
) -> Result<Vec<f64>> {
    let eps_min = 1e-9 * scale;
    let mut eps = 1e-2 * scale;
    let mut beta = start;
    let mut best = beta.clone();
    let mut best_loss = total_loss(rows, y, &beta, q);
    let mut prev = best_loss;
    for _ in 0..params.max_iter {
        sys.clear();
        for (z, &t) in rows.iter().zip(y) {
            let a = (t - dot(z, &beta)).abs() + eps;
            // (Σ z zᵀ / a) β = Σ z (t / a + 2q − 1)
            sys.add_outer(z, 1.0 / a, t + (2.0 * q - 1.0) * a);
        }
        beta = sys.solve()?;
        let loss = total_loss(rows, y, &beta, q);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&beta);
        }
        let rel = (prev - loss).abs() / prev.max(1e-300);
        prev = loss;
        if rel < params.tol {
            if eps <= eps_min {
                break;
            }
            eps = (eps * 0.1).max(eps_min);
        }
    }
    if best.iter().any(|v| !v.is_finite()) {
        return Err(CpteError::InvalidInput("quantile regression diverged".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(Matrix::from_rows(&x).unwrap(), vec![true; n], Matrix::column_vector(y)).unwrap()
    }

    #[test]
    fn median_of_one_to_hundred() {
        // intercept-only: an all-zero covariate column
        let d = dataset(vec![vec![0.0]; 100], (1..=100).map(f64::from).collect());
        let params = LinearQuantileParams {
            levels: vec![0.5],
            ..Default::default()
        };
        let m = fit_linear_quantile(&d, Arm::Treated, 0, &params).unwrap();
        let b0 = m.coef[0][0];
        assert!((50.0 - 1e-6..=51.0 + 1e-6).contains(&b0), "{b0}");
    }

    #[test]
    fn noiseless_line_recovered() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 / 10.0 - 3.0).collect();
        let d = dataset(xs.iter().map(|&v| vec![v]).collect(), xs.iter().map(|v| 2.0 * v).collect());
        let m = fit_linear_quantile(&d, Arm::Treated, 0, &LinearQuantileParams::with_levels(9)).unwrap();
        for b in &m.coef {
            assert!((b[1] - 2.0).abs() < 1e-4 && b[0].abs() < 1e-4, "{b:?}");
        }
    }

    #[test]
    fn constant_outcomes() {
        let d = dataset((0..20).map(|i| vec![i as f64]).collect(), vec![3.5; 20]);
        let m = fit_linear_quantile(&d, Arm::Treated, 0, &LinearQuantileParams::with_levels(5)).unwrap();
        let qs = m.quantiles(&[7.0], &[0.1, 0.5, 0.9]);
        assert_eq!(qs[0], vec![3.5; 3]);
    }

    #[test]
    fn beats_intercept_only_loss() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(1);
        let x: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 1.0 + r[0] - 0.5 * r[1] + rng.random_range(-1.0f64..1.0).powi(3))
            .collect();
        let d = dataset(x.clone(), y.clone());
        let params = LinearQuantileParams::with_levels(9);
        let m = fit_linear_quantile(&d, Arm::Treated, 0, &params).unwrap();
        let mut sy = y.clone();
        sy.sort_by(f64::total_cmp);
        for (k, &q) in m.levels.iter().enumerate() {
            let fitted: f64 = x.iter().zip(&y).map(|(r, &t)| pinball_loss(t - m.fitted(r, k), q)).sum();
            let c = empirical_quantile(&sy, q);
            let flat: f64 = y.iter().map(|&t| pinball_loss(t - c, q)).sum();
            assert!(fitted <= flat + 1e-9, "level {q}: {fitted} > {flat}");
            assert!(m.coef[k].iter().all(|v| v.is_finite()));
        }
    }
}
