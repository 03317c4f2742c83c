use rand::Rng;
use rand_distr::StandardNormal;

use super::{SyntheticConfig, MODIFIER_COLUMN, STREAM_NOISE};
use crate::data::Matrix;
use crate::rng::{derive_seed, rng_from};

/// Potential outcomes with their additive parts kept apart.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    pub baseline: Vec<f64>,
    /// Draws from N(mu_s, sigma²).
    pub simple: Vec<f64>,
    /// Draws from the two-component mixture.
    pub mixture: Vec<f64>,
    /// Whether unit `i` receives the simple draw under treatment.
    pub simple_on_treated: Vec<bool>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl PotentialOutcomes {
    pub(crate) fn recompose(&mut self) {
        for i in 0..self.baseline.len() {
            let (a, b) = if self.simple_on_treated[i] {
                (self.simple[i], self.mixture[i])
            } else {
                (self.mixture[i], self.simple[i])
            };
            self.y1[i] = self.baseline[i] + a;
            self.y0[i] = self.baseline[i] + b;
        }
    }
}

/// Baseline `x·β_Y` plus independent simple and mixture draws. Homogeneous: the
/// treated arm gets the simple draw; heterogeneous: only when the modifier is 1.
pub fn gen_potential_outcomes(cfg: &SyntheticConfig, x: &Matrix) -> PotentialOutcomes {
    let beta = cfg.coefficients().beta_y;
    let c = cfg.constants;
    let mut rng = rng_from(derive_seed(cfg.seed, &[STREAM_NOISE]));
    let n = x.nrows();
    let mut po = PotentialOutcomes {
        baseline: Vec::with_capacity(n),
        simple: Vec::with_capacity(n),
        mixture: Vec::with_capacity(n),
        simple_on_treated: Vec::with_capacity(n),
        y0: vec![0.0; n],
        y1: vec![0.0; n],
    };
    for row in x.rows() {
        po.baseline
            .push(row.iter().zip(&beta).map(|(a, b)| a * b).sum());
        let z: f64 = rng.sample(StandardNormal);
        po.simple.push(c.mu_s + c.sigma * z);
        let low = rng.random_bool(c.b);
        let z: f64 = rng.sample(StandardNormal);
        po.mixture
            .push(if low { c.mu_low } else { c.mu_high } + c.sigma * z);
        po.simple_on_treated
            .push(!cfg.heterogeneous || row[MODIFIER_COLUMN] == 1.0);
    }
    po.recompose();
    po
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_two_sample, mean, normal_cdf};
    use crate::synthgen::gen_features;

    #[test]
    fn homogeneous_cate_and_win_rate() {
        let cfg = SyntheticConfig::new(100_000, 41);
        let x = gen_features(&cfg);
        let po = gen_potential_outcomes(&cfg, &x);
        let diffs: Vec<f64> = po.y1.iter().zip(&po.y0).map(|(a, b)| a - b).collect();
        let cate = mean(&diffs);
        assert!((-0.165..=-0.135).contains(&cate), "{cate}");
        let wins = po
            .simple
            .iter()
            .zip(&po.mixture)
            .filter(|(s, m)| s > m)
            .count() as f64
            / cfg.n as f64;
        assert!((0.717..=0.737).contains(&wins), "{wins}");
    }

    #[test]
    fn heterogeneous_swap_follows_modifier() {
        let cfg = SyntheticConfig {
            heterogeneous: true,
            ..SyntheticConfig::new(20_000, 43)
        };
        let x = gen_features(&cfg);
        let po = gen_potential_outcomes(&cfg, &x);
        let mut treated_noise = Vec::new();
        for i in 0..cfg.n {
            if x.get(i, MODIFIER_COLUMN) == 1.0 {
                assert!(po.simple_on_treated[i]);
                treated_noise.push(po.y1[i] - po.baseline[i]);
            } else {
                assert!((po.y0[i] - po.baseline[i] - po.simple[i]).abs() < 1e-12);
            }
        }
        // y1 - baseline is the simple Gaussian on modifier = 1
        let reference: Vec<f64> = (1..2000)
            .map(|k| 0.3 + 0.2 * crate::stats::normal_quantile(k as f64 / 2000.0))
            .collect();
        assert!(ks_two_sample(&treated_noise, &reference) < 0.03);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }
}
