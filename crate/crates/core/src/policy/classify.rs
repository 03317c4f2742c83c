use super::{LinearPolicy, Policy, TieBreak};
use crate::data::{Matrix, Standardizer};
use crate::error::{CpteError, Result};
use crate::linalg::SymSystem;
use crate::stats::sigmoid;

/// Weighted logistic regression on z-scored features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub standardizer: Standardizer,
    /// `[intercept, slopes…]` on the standardized scale.
    pub beta: Vec<f64>,
    pub converged: bool,
}

impl LogisticFit {
    pub fn linear_score(&self, x: &[f64]) -> f64 {
        let s = &self.standardizer;
        self.beta[0]
            + x.iter()
                .enumerate()
                .map(|(j, v)| self.beta[j + 1] * (v - s.mean[j]) / s.scale[j])
                .sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_score(x))
    }
}

fn objective(z: &[Vec<f64>], labels: &[f64], w: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let mut loss = 0.0;
    for ((zi, &y), &wi) in z.iter().zip(labels).zip(w) {
        let s: f64 = zi.iter().zip(beta).map(|(a, b)| a * b).sum();
        // log(1 + e^s) - y s, computed stably
        let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
        loss += wi * (softplus - y * s);
    }
    loss + 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Minimizes the weighted mean log-loss plus `ridge/2 · |slopes|²` by damped
/// Newton steps. Weights are normalised to sum to one.
pub fn fit_logistic(x: &Matrix, labels: &[f64], weights: &[f64], ridge: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let total: f64 = weights.iter().sum();
    if n == 0 || !(total > 0.0) {
        return Err(CpteError::InvalidInput("logistic fit needs positive total weight".into()));
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let standardizer = Standardizer::fit(x);
    let p = x.ncols() + 1;
    let z: Vec<Vec<f64>> = x
        .rows()
        .map(|r| {
            let mut v = vec![1.0; p];
            standardizer.transform_row(r, &mut v[1..]);
            v
        })
        .collect();
    let mut beta = vec![0.0; p];
    let ybar: f64 = labels.iter().zip(&w).map(|(y, v)| y * v).sum();
    beta[0] = (ybar.clamp(1e-6, 1.0 - 1e-6) / (1.0 - ybar.clamp(1e-6, 1.0 - 1e-6))).ln();
    let mut obj = objective(&z, labels, &w, &beta, ridge);
    let mut sys = SymSystem::zeros(p);
    let mut converged = false;
    for _ in 0..200 {
        sys.clear();
        let mut grad = vec![0.0; p];
        for ((zi, &y), &wi) in z.iter().zip(labels).zip(&w) {
            let s: f64 = zi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(s);
            let h = (wi * mu * (1.0 - mu)).max(1e-300);
            sys.add_outer(zi, h, 0.0);
            for (g, a) in grad.iter_mut().zip(zi) {
                *g += wi * (mu - y) * a;
            }
        }
        for j in 1..p {
            grad[j] += ridge * beta[j];
        }
        sys.add_diagonal(ridge.max(1e-12), true);
        sys.add_diagonal(1e-12, false);
        sys.b = grad.clone();
        let step = sys.solve()?;
        let decrement: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if decrement < 1e-14 {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - t * s).collect();
            let c = objective(&z, labels, &w, &cand, ridge);
            if c <= obj - 1e-4 * t * decrement {
                beta = cand;
                obj = c;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("logistic fit did not converge; returning the last iterate");
    }
    Ok(LogisticFit {
        standardizer,
        beta,
        converged,
    })
}

/// Linear policy from labels `sign(δ̂)` and weights `|δ̂|`.
pub fn weighted_classification_fit(train_x: &Matrix, delta: &[f64]) -> Result<Policy> {
    if delta.len() != train_x.nrows() {
        return Err(CpteError::DimensionMismatch {
            expected: train_x.nrows(),
            got: delta.len(),
        });
    }
    if delta.iter().all(|&d| d == 0.0) {
        return Err(CpteError::DegenerateScores);
    }
    let labels: Vec<f64> = delta.iter().map(|&d| if d > 0.0 { 1.0 } else { 0.0 }).collect();
    let weights: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
    let fit = fit_logistic(train_x, &labels, &weights, 1e-6)?;
    Ok(Policy::Linear(LinearPolicy {
        standardizer: fit.standardizer,
        intercept: fit.beta[0],
        weights: fit.beta[1..].to_vec(),
        tie_break: TieBreak::Control,
    }))
}
