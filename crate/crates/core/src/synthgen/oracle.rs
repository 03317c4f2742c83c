use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GeneratedDataset, HierarchicalCoefficients, MixtureConstants, MODIFIER_COLUMN};
use crate::data::{Arm, Matrix};
use crate::policy::Decide;
use crate::preference::Preference;
use crate::stats::normal_cdf;

/// Closed-form conditionals of a synthetic DGP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OracleDgp {
    Mixture(MixtureOracle),
    Hierarchical(HierarchicalOracle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureOracle {
    pub constants: MixtureConstants,
    pub heterogeneous: bool,
    pub beta_y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalOracle {
    pub coef: HierarchicalCoefficients,
}

impl MixtureOracle {
    pub fn baseline(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta_y).map(|(a, b)| a * b).sum()
    }

    /// Whether arm `arm` receives the simple Gaussian draw at `x`.
    pub fn simple_on(&self, x: &[f64], arm: Arm) -> bool {
        let treated_simple = !self.heterogeneous || x[MODIFIER_COLUMN] == 1.0;
        treated_simple == arm.is_treated()
    }

    /// Conditional CDF of `Y(arm)` given `x`.
    pub fn cdf(&self, x: &[f64], arm: Arm, y: f64) -> f64 {
        let c = &self.constants;
        let r = y - self.baseline(x);
        if self.simple_on(x, arm) {
            normal_cdf((r - c.mu_s) / c.sigma)
        } else {
            c.mixture().cdf(r)
        }
    }

    /// Conditional quantile of `Y(arm)` given `x`.
    pub fn quantile(&self, x: &[f64], arm: Arm, u: f64) -> f64 {
        let c = &self.constants;
        let noise = if self.simple_on(x, arm) {
            c.mu_s + c.sigma * crate::stats::normal_quantile(u)
        } else {
            c.mixture().quantile(u)
        };
        self.baseline(x) + noise
    }

    pub fn sample(&self, x: &[f64], arm: Arm, rng: &mut impl Rng) -> f64 {
        let c = &self.constants;
        let z: f64 = rng.sample(StandardNormal);
        let noise = if self.simple_on(x, arm) {
            c.mu_s + c.sigma * z
        } else {
            let low = rng.random_bool(c.b);
            (if low { c.mu_low } else { c.mu_high }) + c.sigma * z
        };
        self.baseline(x) + noise
    }
}

impl HierarchicalOracle {
    fn parts(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let c = &self.coef;
        (
            c.primary_prob(x, 1),
            c.primary_prob(x, 0),
            c.secondary_mean(x, 1),
            c.secondary_mean(x, 0),
        )
    }

    /// `P(Y(arm) ≻ y)` plus half the tie probability, for a fixed opponent `y`.
    fn beats(&self, x: &[f64], arm: Arm, y: &[f64]) -> f64 {
        let c = &self.coef;
        let p = c.primary_prob(x, arm.index());
        let m = c.secondary_mean(x, arm.index());
        let above = 1.0 - normal_cdf((y[1] - m) / c.s);
        if y[0] == 1.0 {
            p * above
        } else {
            p + (1.0 - p) * above
        }
    }
}

impl OracleDgp {
    /// The preference function the closed forms are written for.
    pub fn preference(&self) -> Preference {
        match self {
            OracleDgp::Mixture(_) => Preference::pns(),
            OracleDgp::Hierarchical(_) => Preference::lexicographic(2),
        }
    }

    pub fn outcome_dim(&self) -> usize {
        match self {
            OracleDgp::Mixture(_) => 1,
            OracleDgp::Hierarchical(_) => 2,
        }
    }

    pub fn q_w(&self, x: &[f64]) -> f64 {
        match self {
            OracleDgp::Mixture(m) => {
                let p = m.constants.simple_beats_mixture();
                if m.simple_on(x, Arm::Treated) {
                    p
                } else {
                    1.0 - p
                }
            }
            OracleDgp::Hierarchical(h) => {
                let (p1, p0, m1, m0) = h.parts(x);
                let tie = p1 * p0 + (1.0 - p1) * (1.0 - p0);
                let s = h.coef.s * std::f64::consts::SQRT_2;
                p1 * (1.0 - p0) + tie * normal_cdf((m1 - m0) / s)
            }
        }
    }

    pub fn q_l(&self, x: &[f64]) -> f64 {
        match self {
            OracleDgp::Mixture(_) | OracleDgp::Hierarchical(_) => 1.0 - self.q_w(x),
        }
    }

    pub fn delta(&self, x: &[f64]) -> f64 {
        self.q_w(x) - self.q_l(x)
    }

    /// `E[Y(1) - Y(0) | x]`, on the primary coordinate for hierarchical outcomes.
    pub fn cate(&self, x: &[f64]) -> f64 {
        match self {
            OracleDgp::Mixture(m) => {
                let gap = m.constants.mean_gap();
                if m.simple_on(x, Arm::Treated) {
                    gap
                } else {
                    -gap
                }
            }
            OracleDgp::Hierarchical(h) => {
                let (p1, p0, _, _) = h.parts(x);
                p1 - p0
            }
        }
    }

    /// `π★(x) = 1{q_W(x) > q_L(x)}`.
    pub fn optimal_action(&self, x: &[f64]) -> bool {
        self.delta(x) > 0.0
    }

    /// `(p_W, p_L)` for an observation `(x, arm, y)`: the expected preference of
    /// the observed outcome against an independent draw from the opposite arm.
    pub fn p(&self, x: &[f64], arm: Arm, y: &[f64]) -> (f64, f64) {
        let other = arm.opposite();
        let beats = match self {
            OracleDgp::Mixture(m) => 1.0 - m.cdf(x, other, y[0]),
            OracleDgp::Hierarchical(h) => h.beats(x, other, y),
        };
        let below = match self {
            OracleDgp::Mixture(m) => m.cdf(x, other, y[0]),
            OracleDgp::Hierarchical(_) => 1.0 - beats,
        };
        // treated: p_W = E w(y | Y0) = P(Y0 below y); control: p_W = E w(Y1 | y)
        if arm.is_treated() {
            (below, beats)
        } else {
            (beats, below)
        }
    }

    /// Draws `Y(arm) | x`.
    pub fn sample(&self, x: &[f64], arm: Arm, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            OracleDgp::Mixture(m) => vec![m.sample(x, arm, rng)],
            OracleDgp::Hierarchical(h) => {
                let c = &h.coef;
                let a = rng.random_bool(c.primary_prob(x, arm.index()));
                let z: f64 = rng.sample(StandardNormal);
                vec![
                    if a { 1.0 } else { 0.0 },
                    c.secondary_mean(x, arm.index()) + c.s * z,
                ]
            }
        }
    }

    /// Value of `π★` on `eval_x`.
    pub fn optimal_value(&self, eval_x: &Matrix) -> f64 {
        let n = eval_x.nrows() as f64;
        eval_x
            .rows()
            .map(|x| self.q_w(x).max(self.q_l(x)))
            .sum::<f64>()
            / n
    }
}

/// Mean over `eval_x` of `π q_W + (1 − π) q_L` under the closed-form oracle.
pub fn oracle_value(dgp: &OracleDgp, policy: &dyn Decide, eval_x: &Matrix) -> f64 {
    let n = eval_x.nrows() as f64;
    eval_x
        .rows()
        .map(|x| {
            if policy.treat(x) {
                dgp.q_w(x)
            } else {
                dgp.q_l(x)
            }
        })
        .sum::<f64>()
        / n
}

/// Policy value computed on the realised joint potential outcomes, i.e. under the
/// DGP's actual coupling: mean of `w(Y_i(1)|Y_i(0))` on treated actions and
/// `w(Y_i(0)|Y_i(1))` otherwise.
pub fn coupled_value(g: &GeneratedDataset, w: &Preference, actions: &[bool]) -> f64 {
    let n = g.y0.nrows();
    (0..n)
        .map(|i| {
            let (a, b) = (g.y1.row(i), g.y0.row(i));
            if actions[i] {
                w.eval_unchecked(a, b)
            } else {
                w.eval_unchecked(b, a)
            }
        })
        .sum::<f64>()
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::synthgen::{HierarchicalConfig, SyntheticConfig};

    #[test]
    fn mixture_oracle_values() {
        let o = SyntheticConfig::new(10, 0).oracle();
        let x = [0.3; 10];
        assert!((o.q_w(&x) - 0.7273).abs() < 5e-4);
        assert_eq!(o.q_w(&x) + o.q_l(&x), 1.0);
        assert!(o.optimal_action(&x));
        assert!(o.cate(&x) < 0.0);

        let het = SyntheticConfig {
            heterogeneous: true,
            ..SyntheticConfig::new(10, 0)
        }
        .oracle();
        let mut x1 = [0.0; 10];
        x1[MODIFIER_COLUMN] = 1.0;
        assert!(het.optimal_action(&x1));
        assert!(!het.optimal_action(&[0.0; 10]));
    }

    #[test]
    fn hierarchical_closed_form_edge_cases() {
        let mut coef = HierarchicalConfig::new(10, 0).coefficients();
        for v in coef.gamma.iter_mut().chain(coef.eta.iter_mut()) {
            v.iter_mut().for_each(|c| *c = 0.0);
        }
        let x = [0.0; 10];
        // p1 = 1, p0 = 0
        let mut c = coef.clone();
        c.gamma0 = [-800.0, 800.0];
        let o = OracleDgp::Hierarchical(HierarchicalOracle { coef: c });
        assert_eq!(o.q_w(&x), 1.0);
        // identical laws
        let mut c = coef.clone();
        c.gamma0 = [0.4, 0.4];
        c.eta0 = [0.1, 0.1];
        let o = OracleDgp::Hierarchical(HierarchicalOracle { coef: c });
        assert!((o.q_w(&x) - 0.5).abs() < 1e-15);
        // p1 = 0.6, p0 = 0.4, standard normal secondaries
        let mut c = coef;
        c.gamma0 = [(0.4f64 / 0.6).ln(), (0.6f64 / 0.4).ln()];
        c.eta0 = [0.0, 0.0];
        let o = OracleDgp::Hierarchical(HierarchicalOracle { coef: c });
        assert!((o.q_w(&x) - 0.6).abs() < 1e-12);
        assert!((o.q_w(&x) + o.q_l(&x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hierarchical_anti_preference_matches_direct_formula() {
        let OracleDgp::Hierarchical(h) = HierarchicalConfig::new(10, 0).oracle() else { panic!() };
        let o = OracleDgp::Hierarchical(h.clone());
        let mut rng = rng_from(8);
        for _ in 0..200 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (p1, p0, m1, m0) = h.parts(&x);
            let tie = p1 * p0 + (1.0 - p1) * (1.0 - p0);
            let direct = p0 * (1.0 - p1) + tie * normal_cdf((m0 - m1) / (h.coef.s * std::f64::consts::SQRT_2));
            assert!((o.q_l(&x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn p_averages_to_q() {
        for dgp in [
            SyntheticConfig::new(10, 0).oracle(),
            HierarchicalConfig::new(10, 0).oracle(),
        ] {
            let x = [0.5, -0.2, 0.1, 0.0, 1.0, -1.0, 0.3, 0.2, 1.0, 0.0];
            let mut rng = rng_from(3);
            let s = 40_000;
            let (mut acc1, mut acc0) = (0.0, 0.0);
            for _ in 0..s {
                let y1 = dgp.sample(&x, Arm::Treated, &mut rng);
                let y0 = dgp.sample(&x, Arm::Control, &mut rng);
                acc1 += dgp.p(&x, Arm::Treated, &y1).0;
                acc0 += dgp.p(&x, Arm::Control, &y0).0;
            }
            let tol = 2.0 / (s as f64).sqrt();
            assert!((acc1 / s as f64 - dgp.q_w(&x)).abs() < tol);
            assert!((acc0 / s as f64 - dgp.q_w(&x)).abs() < tol);
        }
    }
}
