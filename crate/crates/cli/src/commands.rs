use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cpte_core::distest::{fit_estimator, predict_cpte, CpteEstimate, EstimatorSpec};
use cpte_core::harness::{run_experiment, summarize, DgpSpec};
use cpte_core::policy::{
    cross_fit_nuisances, fit_propensity, one_step_policy_fit, one_step_value, oracle_nuisances, plugin_policy_fit,
    plugin_value_from, Decide, NuisanceSet, Policy, PolicyClass, PropensitySpec,
};
use cpte_core::rng::derive_seed;
use cpte_core::stats::std_dev;
use cpte_core::synthgen::OracleDgp;
use cpte_core::Preference;
use serde::Serialize;

use crate::config::{NuisanceMode, Objective, RunConfig};
use crate::error::{CliError, Stage};
use crate::io::{self, OracleColumns};

/// `<dir>/<stem>.resolved.toml` beside `out`.
pub fn echo_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.resolved.toml"))
}

fn write_echo(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    io::write_text(path, &cfg.to_toml())
}

fn dgp_n(dgp: &DgpSpec) -> usize {
    match dgp {
        DgpSpec::Synthetic(c) => c.n,
        DgpSpec::Hierarchical(c) => c.n,
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let dgp = cfg.require_dgp()?;
    dgp.validate().map_err(|e| CliError::Schema(format!("config error at `dgp`: {e}")))?;
    let g = dgp
        .generate(dgp_n(dgp), cfg.seed)
        .map_err(|e| CliError::from_core(e, Stage::Data))?;
    let oracle = cfg.with_oracle.then(|| OracleColumns {
        y0: &g.y0,
        y1: &g.y1,
        propensity: &g.true_propensity,
    });
    io::write_dataset(out, &g.data, oracle)?;
    write_echo(cfg, &echo_path(out))?;
    let (n1, n0) = g.data.arm_sizes();
    log::info!("simulated {} rows ({n1} treated, {n0} control)", g.data.len());
    Ok(())
}

fn oracle_dgp(cfg: &RunConfig) -> Option<OracleDgp> {
    cfg.dgp.as_ref().map(DgpSpec::oracle)
}

fn fit(
    spec: &EstimatorSpec,
    data: &cpte_core::Dataset,
    w: &Preference,
    seed: u64,
    oracle: Option<&OracleDgp>,
) -> Result<Box<dyn cpte_core::distest::CpteModel>, CliError> {
    fit_estimator(spec, data, w, seed, oracle).map_err(|e| CliError::from_core(e, Stage::Estimation))
}

pub fn estimate(cfg: &RunConfig, data_path: &Path, points_path: &Path, out: &Path) -> Result<(), CliError> {
    let loaded = io::read_dataset(data_path)?;
    let data = &loaded.data;
    let points = io::read_points(points_path, data.n_features())?;
    let w = cfg.resolve_preference(data.outcome_dim())?;
    let estimators = cfg.estimators_or_default();
    for spec in &estimators {
        spec.validate().map_err(|e| CliError::Schema(format!("config error at `estimators`: {e}")))?;
    }
    let oracle = oracle_dgp(cfg);

    let mut header = vec!["estimator".to_string()];
    header.extend((0..points.ncols()).map(|j| format!("x{j}")));
    header.extend(["q_w", "q_l", "delta"].map(String::from));
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, spec) in estimators.iter().enumerate() {
        let model = fit(spec, data, &w, derive_seed(cfg.seed, &[i as u64]), oracle.as_ref())?;
        let est = predict_cpte(model.as_ref(), &points).map_err(|e| CliError::from_core(e, Stage::Estimation))?;
        for (r, x) in points.rows().enumerate() {
            let mut rec = vec![spec.name().to_string()];
            rec.extend(x.iter().map(|&v| io::fmt(v)));
            rec.push(io::fmt(est.q_w[r]));
            rec.push(io::fmt(est.q_l[r]));
            rec.push(io::fmt(est.q_w[r] - est.q_l[r]));
            rows.push(rec);
        }
    }
    let mut wtr = io::create_writer(out)?;
    wtr.write_record(&header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.flush().map_err(|e| CliError::io(format!("writing {}", out.display()), e))?;
    write_echo(cfg, &echo_path(out))
}

/// Serialized output of `learn`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct LearnRecord {
    pub policy: Policy,
    pub class: PolicyClass,
    pub objective: Objective,
    pub nuisance: NuisanceMode,
    pub estimator: String,
    pub seed: u64,
    pub n: usize,
    pub treated_fraction: f64,
    pub plug_in_value: f64,
    pub one_step_value: f64,
    /// One-step value clipped to [0, 1].
    pub one_step_clipped: f64,
    pub one_step_se: f64,
}

fn true_propensity(loaded: &io::LoadedData, spec: PropensitySpec) -> Result<Vec<f64>, CliError> {
    if let Some(p) = &loaded.propensity {
        return Ok(p.clone());
    }
    let model = fit_propensity(spec, &loaded.data).map_err(|e| CliError::from_core(e, Stage::Estimation))?;
    Ok(loaded.data.x.rows().map(|r| model.predict(r)).collect())
}

pub fn learn(cfg: &mut RunConfig, data_path: &Path, out: &Path) -> Result<LearnRecord, CliError> {
    let lc = cfg.learn.get_or_insert_with(Default::default).clone();
    if lc.folds < 2 {
        return Err(CliError::Schema("config error at `learn.folds`: must be at least 2".into()));
    }
    let loaded = io::read_dataset(data_path)?;
    let data = &loaded.data;
    data.require_both_arms().map_err(|e| CliError::from_core(e, Stage::Data))?;
    let w = cfg.resolve_preference(data.outcome_dim())?;
    let spec = match lc.nuisance {
        NuisanceMode::Oracle => EstimatorSpec::Oracle,
        NuisanceMode::CrossFit => cfg.estimators_or_default().remove(0),
    };
    spec.validate().map_err(|e| CliError::Schema(format!("config error at `estimators`: {e}")))?;
    let oracle = oracle_dgp(cfg);
    let est_err = |e| CliError::from_core(e, Stage::Estimation);

    let (nuis, in_sample): (NuisanceSet, CpteEstimate) = match lc.nuisance {
        NuisanceMode::Oracle => {
            let dgp = oracle
                .as_ref()
                .ok_or_else(|| CliError::Schema("config error at `dgp`: oracle nuisances need a dgp section".into()))?;
            let e = true_propensity(&loaded, lc.propensity)?;
            let ns = oracle_nuisances(dgp, &w, data, &e).map_err(est_err)?;
            let est = CpteEstimate {
                q_w: ns.q_w.clone(),
                q_l: ns.q_l.clone(),
            };
            (ns, est)
        }
        NuisanceMode::CrossFit => {
            let ns = cross_fit_nuisances(
                data,
                &spec,
                &w,
                lc.folds,
                lc.propensity,
                derive_seed(cfg.seed, &[0xCF]),
                oracle.as_ref(),
            )
            .map_err(est_err)?;
            let model = fit(&spec, data, &w, derive_seed(cfg.seed, &[0xE5]), oracle.as_ref())?;
            let est = predict_cpte(model.as_ref(), &data.x).map_err(est_err)?;
            (ns, est)
        }
    };

    let policy = match lc.objective {
        Objective::OneStep => one_step_policy_fit(data, &nuis, lc.policy),
        Objective::PlugIn => plugin_policy_fit(&data.x, &in_sample, lc.policy),
    }
    .map_err(|e| CliError::from_core(e, Stage::Policy))?;

    let actions = policy.actions(&data.x);
    let plug_in = plugin_value_from(&actions, &in_sample);
    let one_step = one_step_value(&actions, &nuis, &data.t).map_err(|e| CliError::from_core(e, Stage::Policy))?;
    let record = LearnRecord {
        policy,
        class: lc.policy,
        objective: lc.objective,
        nuisance: lc.nuisance,
        estimator: spec.name().into(),
        seed: cfg.seed,
        n: data.len(),
        treated_fraction: actions.iter().filter(|&&a| a).count() as f64 / actions.len() as f64,
        plug_in_value: plug_in.value,
        one_step_value: one_step.value,
        one_step_clipped: one_step.clipped,
        one_step_se: std_dev(&one_step.contributions) / (data.len() as f64).sqrt(),
    };
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    io::write_text(out, &(json + "\n"))?;
    write_echo(cfg, &echo_path(out))?;
    Ok(record)
}

pub fn learn_report(r: &LearnRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "policy: {}", describe_policy(&r.policy));
    let _ = writeln!(s, "estimator: {} ({:?} nuisances)", r.estimator, r.nuisance);
    let _ = writeln!(s, "treated fraction: {:.4}", r.treated_fraction);
    let _ = writeln!(s, "plug-in value: {:.4}", r.plug_in_value);
    let _ = writeln!(s, "one-step value: {:.4} (se {:.4})", r.one_step_value, r.one_step_se);
    s
}

fn describe_policy(p: &Policy) -> String {
    use cpte_core::policy::TreeNode;
    fn node(n: &TreeNode) -> String {
        match n {
            TreeNode::Leaf { treat } => if *treat { "treat" } else { "control" }.into(),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => format!("if x{feature} <= {threshold} then {} else {}", node(left), node(right)),
        }
    }
    match p {
        Policy::Constant { treat } => format!("constant {}", if *treat { "treat" } else { "control" }),
        Policy::Linear(l) => format!("linear, {} weights", l.weights.len()),
        Policy::Tree(t) => format!("tree depth {}: {}", t.depth(), node(&t.root)),
    }
}

/// Writes `results.csv`, `summary.json`, `config.resolved.toml` and, when asked, `timings.csv`.
pub fn experiment(cfg: &mut RunConfig, out_dir: &Path, timings: bool) -> Result<usize, CliError> {
    let exp = cfg.resolve_experiment()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    let res = run_experiment(&exp).map_err(|e| CliError::from_core(e, Stage::Data))?;

    let results = out_dir.join("results.csv");
    let mut w = io::create_writer(&results)?;
    for r in &res.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", results.display()), e))?;

    let summary = summarize(&exp, &res);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    io::write_text(&out_dir.join("summary.json"), &(json + "\n"))?;
    write_echo(cfg, &out_dir.join("config.resolved.toml"))?;

    if timings {
        let path = out_dir.join("timings.csv");
        let mut w = io::create_writer(&path)?;
        w.write_record(["estimator", "method", "n", "repetition", "wall_time"])?;
        for r in &res.rows {
            w.write_record([
                r.estimator.clone(),
                r.method.clone(),
                r.n.to_string(),
                r.repetition.to_string(),
                io::fmt(r.wall_time),
            ])?;
        }
        w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    }
    if summary.error_rows > 0 {
        log::warn!("{} of {} cells failed; see the error column", summary.error_rows, summary.total_rows);
    }
    Ok(summary.error_rows)
}
