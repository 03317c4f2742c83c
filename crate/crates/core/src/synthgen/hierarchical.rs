//! Binary primary outcome plus Gaussian secondary outcome, per arm:
//! `A(t) ~ Bernoulli(sigmoid(x·γ_t + γ0_t))`, `B(t) ~ N(x·η_t + η0_t, s²)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{assign, features};
use super::oracle::{HierarchicalOracle, OracleDgp};
use super::{
    GeneratedDataset, SyntheticCoefficients, N_FEATURES, STREAM_COEF_OUTCOME, STREAM_NOISE,
};
use crate::data::{Dataset, Matrix};
use crate::error::{CpteError, Result};
use crate::rng::{derive_seed, rng_from};
use crate::stats::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchicalConfig {
    pub n: usize,
    #[serde(default)]
    pub observational: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub coef_seed: u64,
    /// Half-width of the symmetric uniform range for primary slopes.
    #[serde(default = "default_slope")]
    pub primary_slope: f64,
    /// Primary intercepts `(control, treated)`.
    #[serde(default = "default_primary_intercepts")]
    pub primary_intercepts: (f64, f64),
    #[serde(default = "default_slope")]
    pub secondary_slope: f64,
    #[serde(default = "default_secondary_intercepts")]
    pub secondary_intercepts: (f64, f64),
    /// Secondary outcome noise standard deviation `s`.
    #[serde(default = "default_secondary_sd")]
    pub secondary_sd: f64,
}

fn default_slope() -> f64 {
    0.3
}
fn default_primary_intercepts() -> (f64, f64) {
    (1.6, 1.9)
}
fn default_secondary_intercepts() -> (f64, f64) {
    (0.0, 0.2)
}
fn default_secondary_sd() -> f64 {
    1.0
}

impl HierarchicalConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            observational: false,
            seed,
            coef_seed: 0,
            primary_slope: default_slope(),
            primary_intercepts: default_primary_intercepts(),
            secondary_slope: default_slope(),
            secondary_intercepts: default_secondary_intercepts(),
            secondary_sd: default_secondary_sd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CpteError::InvalidInput("n must be at least 2".into()));
        }
        if !(self.secondary_sd > 0.0) || self.primary_slope < 0.0 || self.secondary_slope < 0.0 {
            return Err(CpteError::InvalidInput(
                "secondary_sd must be positive and slope ranges nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> HierarchicalCoefficients {
        let mut rng = rng_from(derive_seed(self.coef_seed, &[STREAM_COEF_OUTCOME, 2]));
        let mut draw = |half: f64| -> Vec<f64> {
            (0..N_FEATURES)
                .map(|_| if half > 0.0 { rng.random_range(-half..half) } else { 0.0 })
                .collect()
        };
        let gamma = [draw(self.primary_slope), draw(self.primary_slope)];
        let eta = [draw(self.secondary_slope), draw(self.secondary_slope)];
        HierarchicalCoefficients {
            gamma,
            gamma0: [self.primary_intercepts.0, self.primary_intercepts.1],
            eta,
            eta0: [self.secondary_intercepts.0, self.secondary_intercepts.1],
            s: self.secondary_sd,
        }
    }

    pub fn oracle(&self) -> OracleDgp {
        OracleDgp::Hierarchical(HierarchicalOracle {
            coef: self.coefficients(),
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Per-arm coefficients, indexed `[control, treated]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalCoefficients {
    pub gamma: [Vec<f64>; 2],
    pub gamma0: [f64; 2],
    pub eta: [Vec<f64>; 2],
    pub eta0: [f64; 2],
    pub s: f64,
}

impl HierarchicalCoefficients {
    /// `P(A(t) = 1 | x)`.
    pub fn primary_prob(&self, x: &[f64], arm: usize) -> f64 {
        sigmoid(dot(x, &self.gamma[arm]) + self.gamma0[arm])
    }

    /// `E[B(t) | x]`.
    pub fn secondary_mean(&self, x: &[f64], arm: usize) -> f64 {
        dot(x, &self.eta[arm]) + self.eta0[arm]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn gen_hierarchical(cfg: &HierarchicalConfig) -> Result<GeneratedDataset> {
    cfg.validate()?;
    let x = features(cfg.n, cfg.seed);
    let beta_t = cfg
        .observational
        .then(|| SyntheticCoefficients::draw(cfg.coef_seed).beta_t);
    let (t, true_propensity) = assign(cfg.seed, beta_t.as_deref(), &x)?;
    let coef = cfg.coefficients();
    let mut rng = rng_from(derive_seed(cfg.seed, &[STREAM_NOISE, 2]));
    let mut y0 = Matrix::zeros(cfg.n, 2);
    let mut y1 = Matrix::zeros(cfg.n, 2);
    for i in 0..cfg.n {
        let xi = x.row(i);
        for (arm, y) in [(0usize, &mut y0), (1, &mut y1)] {
            let a = rng.random_bool(coef.primary_prob(xi, arm));
            let z: f64 = rng.sample(StandardNormal);
            y.set(i, 0, if a { 1.0 } else { 0.0 });
            y.set(i, 1, coef.secondary_mean(xi, arm) + coef.s * z);
        }
    }
    let mut y = Matrix::zeros(cfg.n, 2);
    for (i, &ti) in t.iter().enumerate() {
        let src = if ti { &y1 } else { &y0 };
        y.row_mut(i).copy_from_slice(src.row(i));
    }
    Ok(GeneratedDataset {
        data: Dataset::new(x, t, y)?,
        y0,
        y1,
        true_propensity,
    })
}
