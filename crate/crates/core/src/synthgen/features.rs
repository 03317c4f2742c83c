use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    SyntheticConfig, N_CONTINUOUS, N_FEATURES, POSITIVITY_FLOOR, STREAM_ASSIGN, STREAM_FEATURES,
};
use crate::data::Matrix;
use crate::error::{CpteError, Result};
use crate::rng::{derive_seed, rng_from};
use crate::stats::sigmoid;

const MAX_ASSIGNMENT_ATTEMPTS: usize = 100;

/// Columns 0–7 standard normal, columns 8–9 Bernoulli(0.5).
pub fn gen_features(cfg: &SyntheticConfig) -> Matrix {
    features(cfg.n, cfg.seed)
}

pub(crate) fn features(n: usize, seed: u64) -> Matrix {
    let mut rng = rng_from(derive_seed(seed, &[STREAM_FEATURES]));
    let mut x = Matrix::zeros(n, N_FEATURES);
    for i in 0..n {
        let row = x.row_mut(i);
        for v in row.iter_mut().take(N_CONTINUOUS) {
            *v = rng.sample(StandardNormal);
        }
        for v in row.iter_mut().skip(N_CONTINUOUS) {
            *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
    }
    x
}

/// Returns `(t, propensity)`. Redraws `t` when an arm comes out empty.
pub fn assign_treatment(cfg: &SyntheticConfig, x: &Matrix) -> Result<(Vec<bool>, Vec<f64>)> {
    let beta_t = cfg.observational.then(|| cfg.coefficients().beta_t);
    assign(cfg.seed, beta_t.as_deref(), x)
}

/// RCT when `beta_t` is `None`.
pub(crate) fn assign(
    seed: u64,
    beta_t: Option<&[f64]>,
    x: &Matrix,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let propensity = match beta_t {
        Some(b) => observational_propensity(b, x),
        None => vec![0.5; x.nrows()],
    };
    for attempt in 0..MAX_ASSIGNMENT_ATTEMPTS {
        let mut rng = rng_from(derive_seed(seed, &[STREAM_ASSIGN, attempt as u64]));
        let t: Vec<bool> = propensity.iter().map(|&e| rng.random_bool(e)).collect();
        let treated = t.iter().filter(|&&v| v).count();
        if treated > 0 && treated < t.len() {
            return Ok((t, propensity));
        }
    }
    Err(CpteError::DegenerateAssignment {
        attempts: MAX_ASSIGNMENT_ATTEMPTS,
    })
}

/// clamp(sigmoid(x·β − c)) with `c` solved so the sample-mean propensity is 0.5.
fn observational_propensity(beta_t: &[f64], x: &Matrix) -> Vec<f64> {
    let lin: Vec<f64> = x
        .rows()
        .map(|r| r.iter().zip(beta_t).map(|(a, b)| a * b).sum())
        .collect();
    let mean_at = |c: f64| -> f64 {
        lin.iter().map(|&l| clamp_positivity(sigmoid(l - c))).sum::<f64>() / lin.len() as f64
    };
    // mean_at is nonincreasing in c
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    lin.iter().map(|&l| clamp_positivity(sigmoid(l - c))).collect()
}

fn clamp_positivity(e: f64) -> f64 {
    e.clamp(POSITIVITY_FLOOR, 1.0 - POSITIVITY_FLOOR)
}
