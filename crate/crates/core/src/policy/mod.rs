//! Treatment policies, preference policy values and policy learning.

mod classify;
mod crossfit;
mod eif;
mod tree;

pub use classify::{fit_logistic, weighted_classification_fit, LogisticFit};
pub use crossfit::{
    cross_fit_nuisances, fit_propensity, fold_assignment, full_fit_nuisances, one_step_policy_fit,
    oracle_nuisances, plugin_policy_fit, PolicyClass, PropensityModel, PropensitySpec,
};
pub use eif::{eif_phi, ipw_factor, one_step_scores, one_step_value, NuisanceSet, PROPENSITY_CLAMP};
pub use tree::{policy_tree_fit, tree_reward, TreeNode, TreePolicy};

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Standardizer};
use crate::distest::{CpteEstimate, CpteModel};

/// A deterministic map from covariates to an action (`true` = treat).
pub trait Decide: Sync {
    fn treat(&self, x: &[f64]) -> bool;

    fn actions(&self, x: &Matrix) -> Vec<bool> {
        let rows: Vec<&[f64]> = x.rows().collect();
        crate::par::map(&rows, |r| self.treat(r))
    }
}

/// Serializable policies. Evaluation is bit-exact from the record alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Policy {
    Constant { treat: bool },
    Linear(LinearPolicy),
    Tree(TreePolicy),
}

impl Decide for Policy {
    fn treat(&self, x: &[f64]) -> bool {
        match self {
            Policy::Constant { treat } => *treat,
            Policy::Linear(p) => p.treat(x),
            Policy::Tree(p) => p.treat(x),
        }
    }
}

/// Treats when `intercept + weights · z(x) > 0`, with `z` the stored z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Action when the score is exactly zero.
    pub tie_break: TieBreak,
}

impl LinearPolicy {
    pub fn score(&self, x: &[f64]) -> f64 {
        let s = &self.standardizer;
        self.intercept
            + x.iter()
                .enumerate()
                .map(|(j, v)| self.weights[j] * (v - s.mean[j]) / s.scale[j])
                .sum::<f64>()
    }
}

impl Decide for LinearPolicy {
    fn treat(&self, x: &[f64]) -> bool {
        self.score(x) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    Control,
}

/// The OTR rule `π(x) = 1{δ̂(x) > 0}` over a fitted CPTE model.
pub struct ThresholdPolicy<'a> {
    model: &'a dyn CpteModel,
}

impl<'a> ThresholdPolicy<'a> {
    pub fn new(model: &'a dyn CpteModel) -> Self {
        Self { model }
    }

    /// Serializable description; re-evaluation also needs the fitted estimator.
    pub fn record(&self) -> ThresholdRecord {
        ThresholdRecord {
            variant: "threshold".into(),
            rule: "treat iff q_w - q_l > 0".into(),
            tie_break: TieBreak::Control,
            estimator: self.model.summary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub variant: String,
    pub rule: String,
    pub tie_break: TieBreak,
    pub estimator: String,
}

impl Decide for ThresholdPolicy<'_> {
    fn treat(&self, x: &[f64]) -> bool {
        match self.model.delta(x) {
            Ok(d) => d > 0.0,
            Err(e) => {
                log::warn!("threshold policy fell back to control: {e}");
                false
            }
        }
    }
}

/// Plug-in OTR policy.
pub fn otr_plugin(model: &dyn CpteModel) -> ThresholdPolicy<'_> {
    ThresholdPolicy::new(model)
}

/// OTR actions from precomputed estimates.
pub fn otr_actions(est: &CpteEstimate) -> Vec<bool> {
    est.q_w.iter().zip(&est.q_l).map(|(w, l)| w - l > 0.0).collect()
}

/// Treats exactly where the wrapped policy does not.
pub struct Complement<'a>(pub &'a dyn Decide);

impl Decide for Complement<'_> {
    fn treat(&self, x: &[f64]) -> bool {
        !self.0.treat(x)
    }
}

/// Any closure as a policy.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&[f64]) -> bool + Sync> Decide for FnPolicy<F> {
    fn treat(&self, x: &[f64]) -> bool {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMethod {
    PlugIn,
    OneStep,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValueEstimate {
    pub value: f64,
    /// `value` clipped to [0, 1].
    pub clipped: f64,
    pub method: ValueMethod,
    /// Per-observation terms whose mean is `value`.
    pub contributions: Vec<f64>,
}

impl PolicyValueEstimate {
    pub fn from_contributions(method: ValueMethod, contributions: Vec<f64>) -> Self {
        let value = contributions.iter().sum::<f64>() / contributions.len() as f64;
        Self {
            value,
            clipped: value.clamp(0.0, 1.0),
            method,
            contributions,
        }
    }
}

/// `(1/n) Σ π(x_i) q̂_W(x_i) + (1 − π(x_i)) q̂_L(x_i)` given actions at the points.
pub fn plugin_value_from(actions: &[bool], est: &CpteEstimate) -> PolicyValueEstimate {
    let c = actions
        .iter()
        .zip(est.q_w.iter().zip(&est.q_l))
        .map(|(&a, (&w, &l))| if a { w } else { l })
        .collect();
    PolicyValueEstimate::from_contributions(ValueMethod::PlugIn, c)
}

/// Plug-in preference policy value of `policy` on `eval_x`.
pub fn plugin_value(
    policy: &dyn Decide,
    model: &dyn CpteModel,
    eval_x: &Matrix,
) -> crate::error::Result<PolicyValueEstimate> {
    let est = crate::distest::predict_cpte(model, eval_x)?;
    Ok(plugin_value_from(&policy.actions(eval_x), &est))
}

/// Fraction of rows of `eval_x` where the two policies act identically.
pub fn policy_agreement(a: &dyn Decide, b: &dyn Decide, eval_x: &Matrix) -> f64 {
    let (x, y) = (a.actions(eval_x), b.actions(eval_x));
    let same = x.iter().zip(&y).filter(|(u, v)| u == v).count();
    same as f64 / x.len().max(1) as f64
}
