use serde::{Deserialize, Serialize};

use super::{PolicyValueEstimate, ValueMethod};
use crate::error::{CpteError, Result};

/// Propensity clamp applied before inverse weighting.
pub const PROPENSITY_CLAMP: (f64, f64) = (0.05, 0.95);

/// Per-observation nuisances evaluated at the training points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NuisanceSet {
    /// Propensity `ê(X_i)` before clamping.
    pub e: Vec<f64>,
    pub q_w: Vec<f64>,
    pub q_l: Vec<f64>,
    pub p_w: Vec<f64>,
    pub p_l: Vec<f64>,
}

impl NuisanceSet {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for v in [&self.e, &self.q_w, &self.q_l, &self.p_w, &self.p_l] {
            if v.len() != n {
                return Err(CpteError::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// `1/ê` for treated units and `1/(1 − ê)` for controls, `ê` clamped.
pub fn ipw_factor(e: f64, treated: bool) -> f64 {
    let e = e.clamp(PROPENSITY_CLAMP.0, PROPENSITY_CLAMP.1);
    if treated {
        1.0 / e
    } else {
        1.0 / (1.0 - e)
    }
}

/// Doubly robust scores `(Γ_W, Γ_L)` with `Γ = q + ipw · (p − q)`.
pub fn one_step_scores(nuis: &NuisanceSet, t: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    nuis.validate(t.len())?;
    let mut gw = Vec::with_capacity(t.len());
    let mut gl = Vec::with_capacity(t.len());
    for (i, &ti) in t.iter().enumerate() {
        let a = ipw_factor(nuis.e[i], ti);
        gw.push(nuis.q_w[i] + a * (nuis.p_w[i] - nuis.q_w[i]));
        gl.push(nuis.q_l[i] + a * (nuis.p_l[i] - nuis.q_l[i]));
    }
    Ok((gw, gl))
}

/// One-step corrected preference policy value: the mean of
/// `π Γ_W + (1 − π) Γ_L`.
pub fn one_step_value(actions: &[bool], nuis: &NuisanceSet, t: &[bool]) -> Result<PolicyValueEstimate> {
    if actions.len() != t.len() {
        return Err(CpteError::DimensionMismatch {
            expected: t.len(),
            got: actions.len(),
        });
    }
    if t.is_empty() {
        return Err(CpteError::InvalidInput("one-step value needs observations".into()));
    }
    let (gw, gl) = one_step_scores(nuis, t)?;
    let c = actions
        .iter()
        .zip(gw.iter().zip(&gl))
        .map(|(&a, (&w, &l))| if a { w } else { l })
        .collect();
    Ok(PolicyValueEstimate::from_contributions(ValueMethod::OneStep, c))
}

/// Efficient influence function values `Φ_i` at plug-in value `psi`.
pub fn eif_phi(actions: &[bool], nuis: &NuisanceSet, t: &[bool], psi: f64) -> Result<Vec<f64>> {
    nuis.validate(t.len())?;
    if actions.len() != t.len() {
        return Err(CpteError::DimensionMismatch {
            expected: t.len(),
            got: actions.len(),
        });
    }
    Ok((0..t.len())
        .map(|i| {
            let pi = if actions[i] { 1.0 } else { 0.0 };
            let a = ipw_factor(nuis.e[i], t[i]);
            pi * nuis.q_w[i] + (1.0 - pi) * nuis.q_l[i] - psi
                + a * (pi * (nuis.p_w[i] - nuis.q_w[i]) + (1.0 - pi) * (nuis.p_l[i] - nuis.q_l[i]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nuis(n: usize, seed: u64) -> (NuisanceSet, Vec<bool>) {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(seed);
        let mut u = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let ns = NuisanceSet {
            e: u(0.0, 1.0),
            q_w: u(0.0, 1.0),
            q_l: u(0.0, 1.0),
            p_w: u(0.0, 1.0),
            p_l: u(0.0, 1.0),
        };
        let t = u(0.0, 1.0).into_iter().map(|v| v < 0.5).collect();
        (ns, t)
    }

    #[test]
    fn clamp_bounds_weights() {
        assert_eq!(ipw_factor(0.0, true), 20.0);
        assert!((ipw_factor(1.0, false) - 20.0).abs() < 1e-9);
        assert_eq!(ipw_factor(0.5, false), 2.0);
    }

    #[test]
    fn exact_p_equal_q_gives_plugin() {
        let (mut ns, t) = nuis(50, 1);
        ns.p_w = ns.q_w.clone();
        ns.p_l = ns.q_l.clone();
        let acts: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let v = one_step_value(&acts, &ns, &t).unwrap();
        let plug: f64 = (0..50).map(|i| if acts[i] { ns.q_w[i] } else { ns.q_l[i] }).sum::<f64>() / 50.0;
        assert!((v.value - plug).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let (ns, t) = nuis(5, 2);
        assert!(one_step_value(&[true; 4], &ns, &t).is_err());
        assert!(one_step_scores(&ns, &t[..3]).is_err());
    }

    proptest! {
        #[test]
        fn eif_centres_the_one_step(seed in 0u64..1000, n in 1usize..40) {
            let (ns, t) = nuis(n, seed);
            let acts: Vec<bool> = t.iter().map(|v| !v).collect();
            let v = one_step_value(&acts, &ns, &t).unwrap();
            let phi = eif_phi(&acts, &ns, &t, v.value).unwrap();
            let m = phi.iter().sum::<f64>() / n as f64;
            prop_assert!(m.abs() < 1e-10);
        }
    }
}
