//! Dense symmetric solves for the small normal-equation systems used by the
//! regression fits (dimension = feature count + 1).

use crate::error::{CpteError, Result};

/// Symmetric positive-definite system in packed row-major `n×n` form.
#[derive(Debug, Clone)]
pub struct SymSystem {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SymSystem {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
            b: vec![0.0; n],
        }
    }

    pub fn clear(&mut self) {
        self.a.iter_mut().for_each(|v| *v = 0.0);
        self.b.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `weight · z zᵀ` to the matrix and `weight · target · z` to the right-hand side.
    /// Only the lower triangle is accumulated.
    #[inline]
    pub fn add_outer(&mut self, z: &[f64], weight: f64, target: f64) {
        let n = self.n;
        for i in 0..n {
            let wi = weight * z[i];
            self.b[i] += wi * target;
            let row = &mut self.a[i * n..i * n + i + 1];
            for (j, v) in row.iter_mut().enumerate() {
                *v += wi * z[j];
            }
        }
    }

    pub fn add_diagonal(&mut self, lambda: f64, skip_first: bool) {
        let start = usize::from(skip_first);
        for i in start..self.n {
            self.a[i * self.n + i] += lambda;
        }
    }

    /// Solves via Cholesky on the lower triangle. On failure a ridge of `1e-8`
    /// times the mean diagonal is added once, with a warning.
    pub fn solve(&self) -> Result<Vec<f64>> {
        match cholesky_solve(self.n, &self.a, &self.b) {
            Some(x) => Ok(x),
            None => {
                let mean_diag = (0..self.n).map(|i| self.a[i * self.n + i]).sum::<f64>()
                    / self.n as f64;
                let lambda = 1e-8 * mean_diag.max(1.0);
                log::warn!("rank-deficient design; adding ridge penalty {lambda:.3e}");
                let mut a = self.a.clone();
                for i in 0..self.n {
                    a[i * self.n + i] += lambda;
                }
                cholesky_solve(self.n, &a, &self.b).ok_or_else(|| {
                    CpteError::InvalidInput("normal equations are not positive definite".into())
                })
            }
        }
    }
}

fn cholesky_solve(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-13 * scale {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}
