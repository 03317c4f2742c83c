use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    fit_logistic, one_step_scores, policy_tree_fit, weighted_classification_fit, LogisticFit, NuisanceSet,
    Policy, PROPENSITY_CLAMP,
};
use crate::data::{Dataset, Matrix};
use crate::distest::{fit_estimator, predict_cpte, predict_p, CpteEstimate, CpteModel, EstimatorSpec, OracleModel};
use crate::error::{CpteError, Result};
use crate::preference::Preference;
use crate::rng::{derive_seed, rng_from};
use crate::synthgen::OracleDgp;

/// How `ê(x)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PropensitySpec {
    #[default]
    Logistic,
    /// Known design probability, e.g. 0.5 in an RCT.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    Fixed(f64),
    Logistic(LogisticFit),
}

impl PropensityModel {
    /// Clamped propensity at `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let e = match self {
            PropensityModel::Fixed(e) => *e,
            PropensityModel::Logistic(f) => f.probability(x),
        };
        e.clamp(PROPENSITY_CLAMP.0, PROPENSITY_CLAMP.1)
    }
}

pub fn fit_propensity(spec: PropensitySpec, data: &Dataset) -> Result<PropensityModel> {
    match spec {
        PropensitySpec::Fixed(e) => {
            if !(e > 0.0 && e < 1.0) {
                return Err(CpteError::InvalidInput(format!("fixed propensity {e} outside (0, 1)")));
            }
            Ok(PropensityModel::Fixed(e))
        }
        PropensitySpec::Logistic => {
            data.require_both_arms()?;
            let labels: Vec<f64> = data.t.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
            let fit = fit_logistic(&data.x, &labels, &vec![1.0; data.len()], 1e-8)?;
            Ok(PropensityModel::Logistic(fit))
        }
    }
}

fn folds_ok(t: &[bool], folds: &[usize], k: usize) -> Option<usize> {
    let (n0, n1) = t.iter().fold((0, 0), |(a, b), &v| if v { (a, b + 1) } else { (a + 1, b) });
    let mut c0 = vec![0usize; k];
    let mut c1 = vec![0usize; k];
    for (&f, &ti) in folds.iter().zip(t) {
        if ti {
            c1[f] += 1;
        } else {
            c0[f] += 1;
        }
    }
    (0..k).find(|&f| c0[f] == n0 || c1[f] == n1)
}

/// Fold label per unit: a seeded permutation dealt round-robin. Falls back to
/// dealing each arm separately when some fold's training part misses an arm.
pub fn fold_assignment(t: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = t.len();
    if k < 2 || k > n {
        return Err(CpteError::InvalidInput(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
    }
    let mut rng = rng_from(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut folds = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    if folds_ok(t, &folds, k).is_none() {
        return Ok(folds);
    }
    log::info!("re-stratifying folds by treatment");
    let mut pos = 0;
    for arm in [false, true] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| t[i] == arm).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = pos % k;
            pos += 1;
        }
    }
    match folds_ok(t, &folds, k) {
        None => Ok(folds),
        Some(fold) => Err(CpteError::EmptyFold { fold }),
    }
}

/// Nuisances from a model fitted on all of `data`, evaluated in-sample.
pub fn full_fit_nuisances(model: &dyn CpteModel, prop: &PropensityModel, data: &Dataset) -> Result<NuisanceSet> {
    let est = predict_cpte(model, &data.x)?;
    let (p_w, p_l) = predict_p(model, data)?;
    Ok(NuisanceSet {
        e: data.x.rows().map(|r| prop.predict(r)).collect(),
        q_w: est.q_w,
        q_l: est.q_l,
        p_w,
        p_l,
    })
}

/// Out-of-fold nuisances over `k` folds.
pub fn cross_fit_nuisances(
    data: &Dataset,
    spec: &EstimatorSpec,
    w: &Preference,
    k: usize,
    propensity: PropensitySpec,
    seed: u64,
    oracle: Option<&OracleDgp>,
) -> Result<NuisanceSet> {
    data.require_both_arms()?;
    let folds = fold_assignment(&data.t, k, derive_seed(seed, &[0xF01D]))?;
    let fold_ids: Vec<usize> = (0..k).collect();
    let per_fold = crate::par::map(&fold_ids, |&f| -> Result<(Vec<usize>, NuisanceSet)> {
        let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
        let train_data = data.subset(&train);
        let test_data = data.subset(&test);
        let model = fit_estimator(spec, &train_data, w, derive_seed(seed, &[f as u64]), oracle)?;
        let prop = fit_propensity(propensity, &train_data)?;
        Ok((test, full_fit_nuisances(model.as_ref(), &prop, &test_data)?))
    });
    let n = data.len();
    let mut out = NuisanceSet {
        e: vec![0.0; n],
        q_w: vec![0.0; n],
        q_l: vec![0.0; n],
        p_w: vec![0.0; n],
        p_l: vec![0.0; n],
    };
    for r in per_fold {
        let (test, ns) = r?;
        for (j, &i) in test.iter().enumerate() {
            out.e[i] = ns.e[j];
            out.q_w[i] = ns.q_w[j];
            out.q_l[i] = ns.q_l[j];
            out.p_w[i] = ns.p_w[j];
            out.p_l[i] = ns.p_l[j];
        }
    }
    Ok(out)
}

/// Exact nuisances from the generating process and the true propensities.
pub fn oracle_nuisances(dgp: &OracleDgp, w: &Preference, data: &Dataset, propensity: &[f64]) -> Result<NuisanceSet> {
    if propensity.len() != data.len() {
        return Err(CpteError::DimensionMismatch {
            expected: data.len(),
            got: propensity.len(),
        });
    }
    let model = OracleModel::new(dgp.clone(), w.clone())?;
    let prop = PropensityModel::Fixed(0.5);
    let mut ns = full_fit_nuisances(&model, &prop, data)?;
    ns.e = propensity.to_vec();
    Ok(ns)
}

/// Policy class searched by value optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyClass {
    Linear,
    Tree { depth: usize },
}

impl PolicyClass {
    /// Errors with `DegenerateScores` when `gw == gl` everywhere, for either class.
    fn fit(self, x: &Matrix, gw: &[f64], gl: &[f64]) -> Result<Policy> {
        if gw.iter().zip(gl).all(|(a, b)| a == b) {
            return Err(CpteError::DegenerateScores);
        }
        match self {
            PolicyClass::Linear => {
                let d: Vec<f64> = gw.iter().zip(gl).map(|(a, b)| a - b).collect();
                weighted_classification_fit(x, &d)
            }
            PolicyClass::Tree { depth } => policy_tree_fit(x, gw, gl, depth),
        }
    }
}

/// Maximizes the plug-in value over `class` using in-sample CPTE estimates.
pub fn plugin_policy_fit(train_x: &Matrix, est: &CpteEstimate, class: PolicyClass) -> Result<Policy> {
    class.fit(train_x, &est.q_w, &est.q_l)
}

/// Maximizes the one-step value over `class` using the per-observation
/// scores `Γ_W`, `Γ_L`.
pub fn one_step_policy_fit(data: &Dataset, nuis: &NuisanceSet, class: PolicyClass) -> Result<Policy> {
    let (gw, gl) = one_step_scores(nuis, &data.t)?;
    class.fit(&data.x, &gw, &gl)
}
