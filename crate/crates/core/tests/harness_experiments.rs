use std::sync::OnceLock;

use cpte_core::distest::EstimatorSpec;
use cpte_core::harness::{
    bootstrap_ci, evaluation_sweep, run_experiment, summarize, DgpSpec, ExperimentConfig, ExperimentResult,
    PolicyMethod, SweepRow,
};
use cpte_core::policy::{policy_agreement, Complement, FnPolicy, Policy, PolicyClass, PropensitySpec};
use cpte_core::stats::mean;
use cpte_core::synthgen::{generate, SyntheticConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn synthetic(heterogeneous: bool, rho: f64) -> DgpSpec {
    DgpSpec::Synthetic(SyntheticConfig {
        heterogeneous,
        correlation_target: rho,
        ..SyntheticConfig::new(10, 0)
    })
}

fn otr_config(dgp: DgpSpec, estimators: Vec<EstimatorSpec>, n_grid: Vec<usize>, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(dgp, estimators, vec![PolicyMethod::OtrPlugin], n_grid);
    cfg.repetitions = reps;
    cfg.one_step_values = false;
    cfg.master_seed = 2024;
    cfg
}

fn mean_oracle(res: &ExperimentResult, estimator: &str, n: usize) -> f64 {
    let v: Vec<f64> = res
        .rows
        .iter()
        .filter(|r| r.estimator == estimator && r.n == n)
        .map(|r| r.oracle_value.unwrap_or_else(|| panic!("{estimator} n={n}: {:?}", r.error)))
        .collect();
    mean(&v)
}

fn homogeneous_large() -> &'static ExperimentResult {
    static R: OnceLock<ExperimentResult> = OnceLock::new();
    R.get_or_init(|| {
        let cfg = otr_config(
            synthetic(false, 0.0),
            vec![EstimatorSpec::linear_quantile(), EstimatorSpec::ridge()],
            vec![10_000],
            10,
        );
        run_experiment(&cfg).unwrap()
    })
}

#[test]
fn linear_quantile_reaches_optimum_on_homogeneous() {
    let v = mean_oracle(homogeneous_large(), "linear_quantile", 10_000);
    assert!(v >= 0.70, "{v}");
}

#[test]
fn ridge_plug_in_converges_to_the_opposite_policy() {
    let v = mean_oracle(homogeneous_large(), "ridge", 10_000);
    assert!(v <= 0.35, "{v}");
}

#[test]
fn distributional_estimators_improve_with_n() {
    let grid = vec![30, 100, 1000, 10_000];
    let cfg = otr_config(
        synthetic(true, 0.0),
        vec![EstimatorSpec::knn(), EstimatorSpec::linear_quantile()],
        grid.clone(),
        10,
    );
    let res = run_experiment(&cfg).unwrap();
    for est in ["knn", "linear_quantile"] {
        let v: Vec<f64> = grid.iter().map(|&n| mean_oracle(&res, est, n)).collect();
        let inversions = v.windows(2).filter(|p| p[1] < p[0]).count();
        let late = v.windows(2).skip(1).any(|p| p[1] < p[0]);
        assert!(inversions <= 1 && !late, "{est}: {v:?}");
    }
}

fn sweep(estimators: Vec<EstimatorSpec>, rho: f64, reps: usize) -> Vec<SweepRow> {
    let mut cfg = otr_config(synthetic(true, rho), estimators, vec![10_000], reps);
    cfg.propensity = PropensitySpec::Fixed(0.5);
    evaluation_sweep(&cfg).unwrap()
}

fn sweep_mean(rows: &[SweepRow], est: &str) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.estimator == est)
        .map(|r| r.plug_in.unwrap_or_else(|| panic!("{est}: {:?}", r.error)))
        .collect();
    mean(&v)
}

fn uncorrelated_sweep() -> &'static [SweepRow] {
    static R: OnceLock<Vec<SweepRow>> = OnceLock::new();
    R.get_or_init(|| sweep(vec![EstimatorSpec::linear_quantile(), EstimatorSpec::ridge()], 0.0, 2))
}

#[test]
fn linear_quantile_evaluates_the_optimal_policy() {
    let rows = uncorrelated_sweep();
    let lq = sweep_mean(rows, "linear_quantile");
    assert!((lq - 0.72).abs() < 0.03, "linear quantile {lq}");
    assert!((rows[0].oracle - 0.727).abs() < 0.005);
}

#[test]
fn ridge_evaluation_of_the_optimal_policy_saturates_high() {
    let ridge = sweep_mean(uncorrelated_sweep(), "ridge");
    assert!((ridge - 1.0).abs() < 0.05, "ridge {ridge}");
}

#[test]
fn ridge_evaluation_of_the_optimal_policy_follows_mean_gap_sign() {
    // under the optimal policy the chosen arm always has the lower mean
    let ridge = sweep_mean(uncorrelated_sweep(), "ridge");
    assert!(ridge < 0.05, "ridge {ridge}");
}

#[test]
fn correlated_outcomes_evaluation_targets_independent_coupling() {
    for rho in [0.7, -0.7] {
        let rows = sweep(vec![EstimatorSpec::linear_quantile()], rho, 1);
        let v = sweep_mean(&rows, "linear_quantile");
        let coupled = rows[0].coupled;
        assert!(
            (v - 0.727).abs() < 0.03 && (v - coupled).abs() > 0.05,
            "rho {rho}: plug-in {v}, coupled value {coupled}"
        );
    }
}

#[test]
fn optimal_policy_agrees_with_treat_all_on_the_modifier_fraction() {
    let cfg = SyntheticConfig {
        heterogeneous: true,
        ..SyntheticConfig::new(10_000, 77)
    };
    let g = generate(&cfg).unwrap();
    let dgp = cfg.oracle();
    let star = FnPolicy(|x: &[f64]| dgp.optimal_action(x));
    let all = Policy::Constant { treat: true };
    let a = policy_agreement(&star, &all, &g.data.x);
    assert_eq!(a, mean(&g.data.x.column(8)));
    assert!((a - 0.5).abs() < 0.01);
    assert_eq!(policy_agreement(&star, &star, &g.data.x), 1.0);
    assert_eq!(policy_agreement(&star, &Complement(&star), &g.data.x), 0.0);
}

#[test]
fn bootstrap_examples() {
    let v: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
    let (lo, hi) = bootstrap_ci(&v, 10_000, 0.95, 1).unwrap();
    assert!(lo < 0.5 && 0.5 < hi);
    assert_eq!(bootstrap_ci(&[0.3; 7], 500, 0.95, 2).unwrap(), (0.3, 0.3));
    assert!(bootstrap_ci(&[1.0], 100, 0.95, 0).is_err());

    let (mut w10, mut w50) = (0.0, 0.0);
    for s in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let z: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (a, b) = bootstrap_ci(&z[..10], 1000, 0.95, s).unwrap();
        w10 += b - a;
        let (a, b) = bootstrap_ci(&z, 1000, 0.95, s).unwrap();
        w50 += b - a;
    }
    assert!(w10 > w50);
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        synthetic(true, 0.0),
        vec![EstimatorSpec::knn(), EstimatorSpec::ridge()],
        vec![
            PolicyMethod::OtrPlugin,
            PolicyMethod::PluginOptim {
                class: PolicyClass::Tree { depth: 1 },
            },
            PolicyMethod::OneStepOptim {
                class: PolicyClass::Linear,
            },
        ],
        vec![30, 100],
    );
    cfg.repetitions = 3;
    cfg.eval_n = 2000;
    cfg.bootstrap_b = 200;
    cfg
}

#[test]
fn results_are_reproducible_and_complete() {
    let cfg = small_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.rows.len(), 2 * 3 * 2 * 3);
    for r in &a.rows {
        if let Some(v) = r.oracle_value {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert!(cfg.training_seeds().all(|s| s != cfg.eval_seed()));
}

#[test]
fn summary_means_match_rows() {
    let cfg = small_config();
    let res = run_experiment(&cfg).unwrap();
    let s = summarize(&cfg, &res);
    assert_eq!(s.total_rows, res.rows.len());
    assert_eq!(s.groups.len(), 2 * 2 * 3);
    for g in &s.groups {
        let vals: Vec<f64> = res
            .rows
            .iter()
            .filter(|r| r.estimator == g.estimator && r.method == g.method && r.n == g.n)
            .filter_map(|r| r.oracle_value)
            .collect();
        assert_eq!(g.completed, vals.len());
        let m = g.oracle_value_mean.expect("completed cells");
        assert!((m - vals.iter().sum::<f64>() / vals.len() as f64).abs() < 1e-12);
        let (lo, hi) = g.oracle_value_ci.unwrap();
        assert!(lo <= m + 1e-12 && m <= hi + 1e-12);
    }
}
