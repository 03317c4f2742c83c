//! Browser bindings. Each export takes plain numbers or strings and returns a
//! JSON string; the `*_json` functions hold the logic and run on any target.

use cpte_core::distest::{fit_estimator, predict_cpte, EstimatorSpec, KSpec};
use cpte_core::policy::{
    cross_fit_nuisances, one_step_policy_fit, one_step_value, otr_plugin, Decide, FnPolicy, Policy, PolicyClass,
    PropensitySpec, TreeNode,
};
use cpte_core::stats::mean;
use cpte_core::synthgen::{gen_features, generate, oracle_value, SyntheticConfig, MODIFIER_COLUMN};
use cpte_core::{Preference, PreferenceKind};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 5000;

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn check_n(n: usize) -> Result<(), String> {
    if (20..=MAX_N).contains(&n) {
        Ok(())
    } else {
        Err(format!("n must lie in [20, {MAX_N}]"))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct Comparison {
    forward: f64,
    backward: f64,
    tie_aware: bool,
}

/// `w(y | y')` and `w(y' | y)` for comma-separated outcome vectors.
pub fn compare_json(kind: &str, orientation: &str, y: &str, y_ref: &str) -> Result<String, String> {
    let kind = match kind {
        "pns" => PreferenceKind::PnsIndicator,
        "lexicographic" => PreferenceKind::LexicographicWin,
        "risk_difference" => PreferenceKind::RiskDifference,
        other => return Err(format!("unknown preference {other:?}")),
    };
    let (y, y_ref) = (parse_vec(y)?, parse_vec(y_ref)?);
    let mut orient = parse_vec(orientation)?;
    if orient.is_empty() {
        orient = vec![1.0; y.len()];
    }
    let w = Preference::new(kind, orient).map_err(|e| e.to_string())?;
    Ok(to_json(&Comparison {
        forward: w.eval(&y, &y_ref).map_err(|e| e.to_string())?,
        backward: w.eval(&y_ref, &y).map_err(|e| e.to_string())?,
        tie_aware: w.is_tie_aware(),
    }))
}

#[derive(Serialize)]
struct GroupEstimate {
    modifier: u8,
    knn_q_w: f64,
    oracle_q_w: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    n: usize,
    k: usize,
    groups: Vec<GroupEstimate>,
}

/// k-NN CPTE on a simulated heterogeneous trial, averaged over 200 query
/// points within each level of the effect modifier.
pub fn estimate_json(n: usize, seed: u64, k: usize) -> Result<String, String> {
    check_n(n)?;
    let cfg = SyntheticConfig {
        heterogeneous: true,
        ..SyntheticConfig::new(n, seed)
    };
    let g = generate(&cfg).map_err(|e| e.to_string())?;
    let k = if k == 0 { KSpec::default().resolve(n) } else { k };
    let spec = EstimatorSpec::Knn { k: KSpec::Fixed(k) };
    let model = fit_estimator(&spec, &g.data, &Preference::pns(), seed, None).map_err(|e| e.to_string())?;
    let oracle = cfg.oracle();
    let mut groups = Vec::new();
    for level in [0u8, 1] {
        let mut pts = gen_features(&cfg.with_n(200).with_seed(seed ^ 0x5eed));
        for i in 0..pts.nrows() {
            pts.set(i, MODIFIER_COLUMN, level as f64);
        }
        let est = predict_cpte(model.as_ref(), &pts).map_err(|e| e.to_string())?;
        let truth: Vec<f64> = pts.rows().map(|r| oracle.q_w(r)).collect();
        groups.push(GroupEstimate {
            modifier: level,
            knn_q_w: mean(&est.q_w),
            oracle_q_w: mean(&truth),
        });
    }
    Ok(to_json(&EstimateReport { n, k, groups }))
}

#[derive(Serialize)]
struct LearnReport {
    policy: String,
    one_step_value: f64,
    oracle_value: f64,
    plug_in_otr_oracle_value: f64,
    optimal_value: f64,
}

fn describe(node: &TreeNode) -> String {
    match node {
        TreeNode::Leaf { treat } => if *treat { "treat" } else { "control" }.into(),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => format!("(x{feature} <= {threshold:.3} ? {} : {})", describe(left), describe(right)),
    }
}

/// One-step tree policy from cross-fitted k-NN nuisances, scored by the
/// closed-form value on fresh covariates next to the plug-in rule.
pub fn learn_json(n: usize, seed: u64, depth: usize) -> Result<String, String> {
    check_n(n)?;
    if !(1..=2).contains(&depth) {
        return Err("depth must be 1 or 2".into());
    }
    let cfg = SyntheticConfig {
        heterogeneous: true,
        ..SyntheticConfig::new(n, seed)
    };
    let g = generate(&cfg).map_err(|e| e.to_string())?;
    let w = Preference::pns();
    let spec = EstimatorSpec::knn();
    let ns = cross_fit_nuisances(&g.data, &spec, &w, 5, PropensitySpec::Fixed(0.5), seed, None)
        .map_err(|e| e.to_string())?;
    let policy = one_step_policy_fit(&g.data, &ns, PolicyClass::Tree { depth }).map_err(|e| e.to_string())?;
    let os = one_step_value(&policy.actions(&g.data.x), &ns, &g.data.t).map_err(|e| e.to_string())?;

    let dgp = cfg.oracle();
    let eval_x = gen_features(&cfg.with_n(2000).with_seed(seed.wrapping_add(1) ^ 0xE7A1));
    let model = fit_estimator(&spec, &g.data, &w, seed, None).map_err(|e| e.to_string())?;
    let otr = otr_plugin(model.as_ref());
    let star = FnPolicy(|x: &[f64]| dgp.optimal_action(x));
    let text = match &policy {
        Policy::Tree(t) => describe(&t.root),
        Policy::Constant { treat } => format!("always {}", if *treat { "treat" } else { "control" }),
        Policy::Linear(_) => "linear".into(),
    };
    Ok(to_json(&LearnReport {
        policy: text,
        one_step_value: os.value,
        oracle_value: oracle_value(&dgp, &policy, &eval_x),
        plug_in_otr_oracle_value: oracle_value(&dgp, &otr, &eval_x),
        optimal_value: oracle_value(&dgp, &star, &eval_x),
    }))
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare(kind: &str, orientation: &str, y: &str, y_ref: &str) -> Result<String, JsError> {
    js(compare_json(kind, orientation, y, y_ref))
}

#[wasm_bindgen]
pub fn estimate(n: usize, seed: u64, k: usize) -> Result<String, JsError> {
    js(estimate_json(n, seed, k))
}

#[wasm_bindgen]
pub fn learn(n: usize, seed: u64, depth: usize) -> Result<String, JsError> {
    js(learn_json(n, seed, depth))
}
