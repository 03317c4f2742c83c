//! Repeated-training experiment grids with oracle evaluation on held-out data.

mod bootstrap;

pub use bootstrap::bootstrap_ci;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::distest::{fit_estimator, predict_cpte, EstimatorSpec};
use crate::error::{CpteError, Result};
use crate::policy::{
    cross_fit_nuisances, one_step_policy_fit, one_step_value, oracle_nuisances, otr_plugin, plugin_policy_fit,
    plugin_value_from, policy_agreement, Decide, FnPolicy, NuisanceSet, PolicyClass, PropensitySpec,
};
use crate::preference::Preference;
use crate::rng::{derive_seed, repetition_seed};
use crate::stats::mean;
use crate::synthgen::{
    coupled_value, gen_features, gen_hierarchical, generate, oracle_value, GeneratedDataset, HierarchicalConfig,
    OracleDgp, SyntheticConfig,
};

/// Generating process of an experiment; `n` and `seed` are overridden per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DgpSpec {
    Synthetic(SyntheticConfig),
    Hierarchical(HierarchicalConfig),
}

impl DgpSpec {
    pub fn generate(&self, n: usize, seed: u64) -> Result<GeneratedDataset> {
        match self {
            DgpSpec::Synthetic(c) => generate(&c.with_n(n).with_seed(seed)),
            DgpSpec::Hierarchical(c) => gen_hierarchical(&c.with_n(n).with_seed(seed)),
        }
    }

    pub fn oracle(&self) -> OracleDgp {
        match self {
            DgpSpec::Synthetic(c) => c.oracle(),
            DgpSpec::Hierarchical(c) => c.oracle(),
        }
    }

    pub fn preference(&self) -> Preference {
        self.oracle().preference()
    }

    /// Held-out covariates.
    pub fn eval_x(&self, n: usize, seed: u64) -> Result<Matrix> {
        match self {
            DgpSpec::Synthetic(c) => Ok(gen_features(&c.with_n(n).with_seed(seed))),
            DgpSpec::Hierarchical(_) => Ok(self.generate(n, seed)?.data.x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DgpSpec::Synthetic(c) => c.validate(),
            DgpSpec::Hierarchical(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyMethod {
    /// `1{δ̂ > 0}` from the full-sample fit.
    OtrPlugin,
    /// Plug-in value maximized over a policy class.
    PluginOptim { class: PolicyClass },
    /// Cross-fitted one-step value maximized over a policy class.
    OneStepOptim { class: PolicyClass },
}

impl PolicyMethod {
    pub fn label(&self) -> String {
        let class = |c: &PolicyClass| match c {
            PolicyClass::Linear => "linear".to_string(),
            PolicyClass::Tree { depth } => format!("tree{depth}"),
        };
        match self {
            PolicyMethod::OtrPlugin => "otr_plugin".into(),
            PolicyMethod::PluginOptim { class: c } => format!("plugin_optim_{}", class(c)),
            PolicyMethod::OneStepOptim { class: c } => format!("one_step_optim_{}", class(c)),
        }
    }
}

fn default_reps() -> usize {
    50
}
fn default_eval_n() -> usize {
    10_000
}
fn default_b() -> usize {
    1000
}
fn default_folds() -> usize {
    5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub methods: Vec<PolicyMethod>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_eval_n")]
    pub eval_n: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_b")]
    pub bootstrap_b: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub propensity: PropensitySpec,
    /// Also report the cross-fitted one-step value of every learned policy.
    #[serde(default = "default_true")]
    pub one_step_values: bool,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, estimators: Vec<EstimatorSpec>, methods: Vec<PolicyMethod>, n_grid: Vec<usize>) -> Self {
        Self {
            dgp,
            estimators,
            methods,
            n_grid,
            repetitions: default_reps(),
            eval_n: default_eval_n(),
            master_seed: 0,
            bootstrap_b: default_b(),
            folds: default_folds(),
            propensity: PropensitySpec::default(),
            one_step_values: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        let bad = |m: &str| Err(CpteError::InvalidInput(m.to_string()));
        if self.estimators.is_empty() || self.methods.is_empty() || self.n_grid.is_empty() {
            return bad("estimators, methods and n_grid must be nonempty");
        }
        if self.repetitions == 0 || self.eval_n == 0 {
            return bad("repetitions and eval_n must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        for e in &self.estimators {
            e.validate()?;
        }
        Ok(())
    }

    /// Training sub-seed of repetition `rep` at grid index `n_index`.
    pub fn training_seed(&self, n_index: usize, rep: usize) -> u64 {
        repetition_seed(self.master_seed, n_index, rep)
    }

    /// Seed of the held-out evaluation set; never equal to a training seed.
    pub fn eval_seed(&self) -> u64 {
        let mut s = derive_seed(self.master_seed, &[u64::MAX]);
        while self.training_seeds().any(|t| t == s) {
            s = derive_seed(s, &[1]);
        }
        s
    }

    pub fn training_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_grid.len()).flat_map(move |i| (0..self.repetitions).map(move |r| self.training_seed(i, r)))
    }
}

/// One (estimator, method, n, repetition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub method: String,
    pub n: usize,
    pub repetition: usize,
    pub oracle_value: Option<f64>,
    pub plug_in_value: Option<f64>,
    pub one_step_value: Option<f64>,
    pub agreement_with_oracle: Option<f64>,
    /// Seconds spent fitting and learning; excluded from deterministic outputs.
    #[serde(skip)]
    pub wall_time: f64,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(estimator: &str, method: String, n: usize, repetition: usize, e: &CpteError) -> Self {
        Self {
            estimator: estimator.to_string(),
            method,
            n,
            repetition,
            oracle_value: None,
            plug_in_value: None,
            one_step_value: None,
            agreement_with_oracle: None,
            wall_time: 0.0,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    /// Optimal oracle value on the held-out set.
    pub optimal_value: f64,
}

impl ExperimentResult {
    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    dgp: OracleDgp,
    w: Preference,
    eval_x: &'a Matrix,
}

impl Cell<'_> {
    fn run(&self, spec: &EstimatorSpec, g: &GeneratedDataset, n: usize, rep: usize, seed: u64) -> Vec<ResultRow> {
        let name = spec.name();
        let start = Instant::now();
        let labels: Vec<String> = self.cfg.methods.iter().map(PolicyMethod::label).collect();
        let fail_all = |e: &CpteError| -> Vec<ResultRow> {
            labels
                .iter()
                .map(|m| ResultRow::failed(name, m.clone(), n, rep, e))
                .collect()
        };
        let data = &g.data;
        let fit_seed = derive_seed(seed, &[0xE5]);
        let model = match fit_estimator(spec, data, &self.w, fit_seed, Some(&self.dgp)) {
            Ok(m) => m,
            Err(e) => return fail_all(&e),
        };
        let train_est = match predict_cpte(model.as_ref(), &data.x) {
            Ok(v) => v,
            Err(e) => return fail_all(&e),
        };
        let needs_nuis =
            self.cfg.one_step_values || self.cfg.methods.iter().any(|m| matches!(m, PolicyMethod::OneStepOptim { .. }));
        let nuis: Option<Result<NuisanceSet>> = needs_nuis.then(|| self.nuisances(spec, g, seed));
        let setup = start.elapsed().as_secs_f64();
        let star = FnPolicy(|x: &[f64]| self.dgp.optimal_action(x));

        let mut rows = Vec::with_capacity(labels.len());
        for (method, label) in self.cfg.methods.iter().zip(labels) {
            let t0 = Instant::now();
            let learned: Result<Box<dyn Decide + '_>> = match method {
                PolicyMethod::OtrPlugin => Ok(Box::new(otr_plugin(model.as_ref()))),
                PolicyMethod::PluginOptim { class } => {
                    plugin_policy_fit(&data.x, &train_est, *class).map(|p| Box::new(p) as Box<dyn Decide>)
                }
                PolicyMethod::OneStepOptim { class } => match &nuis {
                    Some(Ok(ns)) => one_step_policy_fit(data, ns, *class).map(|p| Box::new(p) as Box<dyn Decide>),
                    Some(Err(e)) => Err(CpteError::InvalidInput(format!("nuisance fit failed: {e}"))),
                    None => unreachable!("nuisances are fitted for one-step methods"),
                },
            };
            let policy = match learned {
                Ok(p) => p,
                Err(e) => {
                    rows.push(ResultRow::failed(name, label, n, rep, &e));
                    continue;
                }
            };
            let train_actions = policy.actions(&data.x);
            let plug_in = plugin_value_from(&train_actions, &train_est).value;
            let one_step = match &nuis {
                Some(Ok(ns)) => one_step_value(&train_actions, ns, &data.t).ok().map(|v| v.value),
                _ => None,
            };
            rows.push(ResultRow {
                estimator: name.to_string(),
                method: label,
                n,
                repetition: rep,
                oracle_value: Some(oracle_value(&self.dgp, policy.as_ref(), self.eval_x)),
                plug_in_value: Some(plug_in),
                one_step_value: one_step,
                agreement_with_oracle: Some(policy_agreement(policy.as_ref(), &star, self.eval_x)),
                wall_time: setup + t0.elapsed().as_secs_f64(),
                error: None,
            });
        }
        rows
    }

    fn nuisances(&self, spec: &EstimatorSpec, g: &GeneratedDataset, seed: u64) -> Result<NuisanceSet> {
        if let EstimatorSpec::Oracle = spec {
            return oracle_nuisances(&self.dgp, &self.w, &g.data, &g.true_propensity);
        }
        cross_fit_nuisances(
            &g.data,
            spec,
            &self.w,
            self.cfg.folds,
            self.cfg.propensity,
            derive_seed(seed, &[0xCF]),
            Some(&self.dgp),
        )
    }
}

/// Runs every (n, repetition, estimator, method) cell. Cell failures become
/// error rows. Rows are sorted by (n, repetition, estimator order, method order).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let dgp = cfg.dgp.oracle();
    let eval_x = cfg.dgp.eval_x(cfg.eval_n, cfg.eval_seed())?;
    let cell = Cell {
        cfg,
        w: dgp.preference(),
        dgp: dgp.clone(),
        eval_x: &eval_x,
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.n_grid.len())
        .flat_map(|i| (0..cfg.repetitions).map(move |r| (i, r)))
        .collect();
    let per_job = crate::par::map(&jobs, |&(i, rep)| {
        let n = cfg.n_grid[i];
        let seed = cfg.training_seed(i, rep);
        match cfg.dgp.generate(n, seed) {
            Ok(g) => cfg
                .estimators
                .iter()
                .flat_map(|spec| cell.run(spec, &g, n, rep, seed))
                .collect::<Vec<_>>(),
            Err(e) => cfg
                .estimators
                .iter()
                .flat_map(|spec| {
                    cfg.methods
                        .iter()
                        .map(|m| ResultRow::failed(spec.name(), m.label(), n, rep, &e))
                        .collect::<Vec<_>>()
                })
                .collect(),
        }
    });
    log::info!("experiment finished: {} cells", jobs.len());
    Ok(ExperimentResult {
        rows: per_job.into_iter().flatten().collect(),
        optimal_value: dgp.optimal_value(&eval_x),
    })
}

/// Aggregate over repetitions for one (estimator, method, n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub method: String,
    pub n: usize,
    pub completed: usize,
    pub errors: usize,
    pub oracle_value_mean: Option<f64>,
    pub oracle_value_ci: Option<(f64, f64)>,
    pub plug_in_value_mean: Option<f64>,
    pub one_step_value_mean: Option<f64>,
    pub agreement_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub optimal_value: f64,
    pub total_rows: usize,
    pub error_rows: usize,
    pub groups: Vec<SummaryRow>,
}

fn mean_of(v: Vec<f64>) -> Option<f64> {
    (!v.is_empty()).then(|| mean(&v))
}

/// Means per group and percentile bootstrap intervals of the oracle value.
pub fn summarize(cfg: &ExperimentConfig, result: &ExperimentResult) -> ExperimentSummary {
    let mut keys: Vec<(String, String, usize)> = Vec::new();
    for r in &result.rows {
        let k = (r.estimator.clone(), r.method.clone(), r.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let groups = keys
        .into_iter()
        .enumerate()
        .map(|(gi, (estimator, method, n))| {
            let rows: Vec<&ResultRow> = result
                .rows
                .iter()
                .filter(|r| r.estimator == estimator && r.method == method && r.n == n)
                .collect();
            let col = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(|r| f(r)).collect() };
            let oracle = col(|r| r.oracle_value);
            let ci = bootstrap_ci(&oracle, cfg.bootstrap_b, 0.95, derive_seed(cfg.master_seed, &[0xB0, gi as u64])).ok();
            SummaryRow {
                completed: rows.iter().filter(|r| r.error.is_none()).count(),
                errors: rows.iter().filter(|r| r.error.is_some()).count(),
                oracle_value_ci: ci,
                oracle_value_mean: mean_of(oracle),
                plug_in_value_mean: mean_of(col(|r| r.plug_in_value)),
                one_step_value_mean: mean_of(col(|r| r.one_step_value)),
                agreement_mean: mean_of(col(|r| r.agreement_with_oracle)),
                estimator,
                method,
                n,
            }
        })
        .collect();
    ExperimentSummary {
        optimal_value: result.optimal_value,
        total_rows: result.rows.len(),
        error_rows: result.error_count(),
        groups,
    }
}

/// Estimates of `V(π★)` by one estimator on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimator: String,
    pub n: usize,
    pub repetition: usize,
    pub plug_in: Option<f64>,
    pub one_step: Option<f64>,
    /// Closed-form `V(π★)` on the held-out set.
    pub oracle: f64,
    /// `V(π★)` under the realised coupling of the held-out potential outcomes.
    pub coupled: f64,
    pub error: Option<String>,
}

/// Policy-evaluation sweep for the optimal policy `π★`. Plug-in and one-step
/// values use the same cross-fitted nuisances on the training sample.
pub fn evaluation_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let dgp = cfg.dgp.oracle();
    let w = dgp.preference();
    let eval = cfg.dgp.generate(cfg.eval_n, cfg.eval_seed())?;
    let star = FnPolicy(|x: &[f64]| dgp.optimal_action(x));
    let oracle = oracle_value(&dgp, &star, &eval.data.x);
    let coupled = coupled_value(&eval, &w, &star.actions(&eval.data.x));
    let cell = Cell {
        cfg,
        w: w.clone(),
        dgp: dgp.clone(),
        eval_x: &eval.data.x,
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.n_grid.len())
        .flat_map(|i| (0..cfg.repetitions).map(move |r| (i, r)))
        .collect();
    let per_job = crate::par::map(&jobs, |&(i, rep)| -> Vec<SweepRow> {
        let n = cfg.n_grid[i];
        let seed = cfg.training_seed(i, rep);
        let g = cfg.dgp.generate(n, seed);
        cfg.estimators
            .iter()
            .map(|spec| {
                let res = g.as_ref().map_err(|e| CpteError::InvalidInput(e.to_string())).and_then(|g| {
                    let ns = cell.nuisances(spec, g, seed)?;
                    let acts = star.actions(&g.data.x);
                    let plug = acts
                        .iter()
                        .zip(ns.q_w.iter().zip(&ns.q_l))
                        .map(|(&a, (&qw, &ql))| if a { qw } else { ql })
                        .sum::<f64>()
                        / n as f64;
                    Ok((plug, one_step_value(&acts, &ns, &g.data.t)?.value))
                });
                let (plug_in, one_step, error) = match res {
                    Ok((p, o)) => (Some(p), Some(o), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                SweepRow {
                    estimator: spec.name().to_string(),
                    n,
                    repetition: rep,
                    plug_in,
                    one_step,
                    oracle,
                    coupled,
                    error,
                }
            })
            .collect()
    });
    Ok(per_job.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke(estimators: Vec<EstimatorSpec>) -> ExperimentConfig {
        let dgp = DgpSpec::Synthetic(SyntheticConfig {
            heterogeneous: true,
            ..SyntheticConfig::new(10, 0)
        });
        let mut cfg = ExperimentConfig::new(
            dgp,
            estimators,
            vec![
                PolicyMethod::OtrPlugin,
                PolicyMethod::OneStepOptim {
                    class: PolicyClass::Tree { depth: 1 },
                },
            ],
            vec![30, 100],
        );
        cfg.repetitions = 2;
        cfg.eval_n = 2000;
        cfg.propensity = PropensitySpec::Fixed(0.5);
        cfg
    }

    #[test]
    fn eval_seed_is_disjoint() {
        let cfg = smoke(vec![EstimatorSpec::knn()]);
        let e = cfg.eval_seed();
        assert!(cfg.training_seeds().all(|s| s != e));
    }

    #[test]
    fn row_count_and_determinism() {
        let cfg = smoke(vec![EstimatorSpec::knn(), EstimatorSpec::ridge()]);
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2 * 2);
        let b = run_experiment(&cfg).unwrap();
        let strip = |r: &ExperimentResult| -> Vec<ResultRow> {
            r.rows.iter().cloned().map(|mut x| {
                x.wall_time = 0.0;
                x
            }).collect()
        };
        assert_eq!(strip(&a), strip(&b));
        for r in &a.rows {
            if let Some(v) = r.oracle_value {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn oracle_estimator_reaches_optimum() {
        let cfg = smoke(vec![EstimatorSpec::Oracle]);
        let res = run_experiment(&cfg).unwrap();
        for r in res.rows.iter().filter(|r| r.method == "otr_plugin") {
            assert!((r.oracle_value.unwrap() - res.optimal_value).abs() < 0.005, "{r:?}");
        }
    }

    #[test]
    fn failing_cells_become_error_rows() {
        let mut cfg = smoke(vec![EstimatorSpec::Knn {
            k: crate::distest::KSpec::Fixed(40),
        }]);
        cfg.n_grid = vec![30];
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert!(res.rows.iter().all(|r| r.error.is_some()));
        let s = summarize(&cfg, &res);
        assert_eq!(s.error_rows, 4);
    }
}
