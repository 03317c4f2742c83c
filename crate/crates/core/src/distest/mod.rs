//! Distributional conditional-outcome models and CPTE estimates.
//!
//! Every fitted estimator implements [`CpteModel`]: it returns `(q̂_W(x), q̂_L(x))`
//! for a query point and the per-observation terms `(p̂_W, p̂_L)` used by the
//! influence-function correction.

mod baseline;
mod forest;
mod knn;
mod linear_quantile;
mod sampler;

pub use baseline::{fit_baseline, BaselineLearner, BaselineModel, MeanModel, RidgeModel};
pub use forest::{fit_qrf, ForestParams, ForestQuantileModel, RegressionForest};
pub use knn::{knn_cpte, KnnClassifier, KnnIndex, KnnModel};
pub use linear_quantile::{fit_linear_quantile, pinball_loss, LinearQuantileModel, LinearQuantileParams};
pub use sampler::{
    algo1_estimate, estimate_p, query_seed, BernoulliQuantile, FactorizedModel, FnQuantile,
    QuantileModel, SamplerModel,
};

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, Matrix};
use crate::error::{CpteError, Result};
use crate::preference::Preference;
use crate::synthgen::OracleDgp;

/// A fitted CPTE estimator. Implementations are immutable after fitting and
/// safe to query from many threads.
pub trait CpteModel: Send + Sync {
    fn preference(&self) -> &Preference;

    /// `(q̂_W(x), q̂_L(x))`.
    fn cpte(&self, x: &[f64]) -> Result<(f64, f64)>;

    /// `(p̂_W, p̂_L)` for an observation with covariates `x`, arm `arm` and outcome `y`.
    fn p_hat(&self, x: &[f64], arm: Arm, y: &[f64]) -> Result<(f64, f64)>;

    /// Short human-readable summary of the fitted model.
    fn summary(&self) -> String {
        String::from("cpte model")
    }

    fn delta(&self, x: &[f64]) -> Result<f64> {
        let (w, l) = self.cpte(x)?;
        Ok(w - l)
    }
}

/// Point-wise CPTE values over a matrix of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct CpteEstimate {
    pub q_w: Vec<f64>,
    pub q_l: Vec<f64>,
}

impl CpteEstimate {
    pub fn len(&self) -> usize {
        self.q_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_w.is_empty()
    }

    pub fn delta(&self) -> Vec<f64> {
        self.q_w.iter().zip(&self.q_l).map(|(a, b)| a - b).collect()
    }
}

/// Evaluates `model` at every row of `x` (in parallel when enabled).
pub fn predict_cpte(model: &dyn CpteModel, x: &Matrix) -> Result<CpteEstimate> {
    let rows: Vec<&[f64]> = x.rows().collect();
    let pairs: Vec<Result<(f64, f64)>> = crate::par::map(&rows, |r| model.cpte(r));
    let mut q_w = Vec::with_capacity(rows.len());
    let mut q_l = Vec::with_capacity(rows.len());
    for p in pairs {
        let (a, b) = p?;
        q_w.push(a);
        q_l.push(b);
    }
    Ok(CpteEstimate { q_w, q_l })
}

/// `(p̂_W, p̂_L)` for every observation of `data`.
pub fn predict_p(model: &dyn CpteModel, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let pairs = crate::par::map(&idx, |&i| model.p_hat(data.x.row(i), data.arm(i), data.y.row(i)));
    let mut pw = Vec::with_capacity(idx.len());
    let mut pl = Vec::with_capacity(idx.len());
    for p in pairs {
        let (a, b) = p?;
        pw.push(a);
        pl.push(b);
    }
    Ok((pw, pl))
}

/// Neighbour-count rule, either a fixed `k` or a schedule in the training size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(usize),
    Rule(KRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    One,
    /// `⌈ln n⌉`
    Log,
    /// `⌈2 ln n⌉`
    TwoLog,
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Rule(KRule::Log)
    }
}

impl KSpec {
    pub fn resolve(self, n: usize) -> usize {
        let ln = (n.max(1) as f64).ln();
        match self {
            KSpec::Fixed(k) => k,
            KSpec::Rule(KRule::One) => 1,
            KSpec::Rule(KRule::Log) => (ln.ceil() as usize).max(1),
            KSpec::Rule(KRule::TwoLog) => ((2.0 * ln).ceil() as usize).max(1),
        }
    }
}

fn default_levels() -> usize {
    99
}
fn default_grid() -> usize {
    256
}
fn default_samples() -> usize {
    1000
}
fn default_alpha() -> f64 {
    1.0
}

/// Estimator configuration, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Distributional k-NN over cross pairs of neighbours.
    Knn {
        #[serde(default)]
        k: KSpec,
    },
    /// Per-arm linear quantile regression sampled with Algorithm 1.
    LinearQuantile {
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default = "default_grid")]
        grid_size: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Per-arm quantile regression forest sampled with Algorithm 1.
    QuantileForest {
        #[serde(default)]
        n_trees: Option<usize>,
        #[serde(default = "default_grid")]
        grid_size: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    KnnMean {
        #[serde(default)]
        k: KSpec,
    },
    Ridge {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    ForestMean {
        #[serde(default)]
        n_trees: Option<usize>,
    },
    /// Closed-form conditionals of the generating process.
    Oracle,
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Knn { .. } => "knn",
            EstimatorSpec::LinearQuantile { .. } => "linear_quantile",
            EstimatorSpec::QuantileForest { .. } => "quantile_forest",
            EstimatorSpec::KnnMean { .. } => "knn_mean",
            EstimatorSpec::Ridge { .. } => "ridge",
            EstimatorSpec::ForestMean { .. } => "forest_mean",
            EstimatorSpec::Oracle => "oracle",
        }
    }

    pub fn knn() -> Self {
        EstimatorSpec::Knn { k: KSpec::default() }
    }

    pub fn linear_quantile() -> Self {
        EstimatorSpec::LinearQuantile {
            levels: default_levels(),
            grid_size: default_grid(),
            samples: default_samples(),
        }
    }

    pub fn quantile_forest() -> Self {
        EstimatorSpec::QuantileForest {
            n_trees: None,
            grid_size: default_grid(),
            samples: default_samples(),
        }
    }

    pub fn ridge() -> Self {
        EstimatorSpec::Ridge { alpha: 1.0 }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(
            self,
            EstimatorSpec::KnnMean { .. } | EstimatorSpec::Ridge { .. } | EstimatorSpec::ForestMean { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CpteError::InvalidInput(m.to_string()));
        match *self {
            EstimatorSpec::Knn { k: KSpec::Fixed(0) } | EstimatorSpec::KnnMean { k: KSpec::Fixed(0) } => {
                bad("k must be positive")
            }
            EstimatorSpec::LinearQuantile { levels, grid_size, samples } => {
                if levels < 2 || grid_size < 2 || samples < 1 {
                    bad("levels and grid_size must be at least 2, samples at least 1")
                } else {
                    Ok(())
                }
            }
            EstimatorSpec::QuantileForest { n_trees, grid_size, samples } => {
                if n_trees == Some(0) || grid_size < 2 || samples < 1 {
                    bad("n_trees must be positive, grid_size at least 2, samples at least 1")
                } else {
                    Ok(())
                }
            }
            EstimatorSpec::ForestMean { n_trees: Some(0) } => bad("n_trees must be positive"),
            EstimatorSpec::Ridge { alpha } if !(alpha >= 0.0) => bad("alpha must be nonnegative"),
            _ => Ok(()),
        }
    }
}

/// Fits `spec` on `data`. `oracle` is required only for [`EstimatorSpec::Oracle`].
pub fn fit_estimator(
    spec: &EstimatorSpec,
    data: &Dataset,
    w: &Preference,
    seed: u64,
    oracle: Option<&OracleDgp>,
) -> Result<Box<dyn CpteModel>> {
    spec.validate()?;
    w.require_bounded()?;
    if w.dim() != data.outcome_dim() {
        return Err(CpteError::DimensionMismatch {
            expected: w.dim(),
            got: data.outcome_dim(),
        });
    }
    if let EstimatorSpec::Oracle = spec {
        let dgp = oracle.ok_or_else(|| {
            CpteError::InvalidInput("oracle estimator requires a synthetic generating process".into())
        })?;
        return Ok(Box::new(OracleModel::new(dgp.clone(), w.clone())?));
    }
    data.require_both_arms()?;
    Ok(match *spec {
        EstimatorSpec::Knn { k } => Box::new(KnnModel::fit(data, w.clone(), k.resolve(data.len()))?),
        EstimatorSpec::LinearQuantile { levels, grid_size, samples } => {
            let params = LinearQuantileParams::with_levels(levels);
            let fit_arm = |arm: Arm, component: usize| -> Result<Box<dyn QuantileModel>> {
                Ok(Box::new(fit_linear_quantile(data, arm, component, &params)?))
            };
            Box::new(SamplerModel::fit_with(data, w.clone(), grid_size, samples, seed, fit_arm)?)
        }
        EstimatorSpec::QuantileForest { n_trees, grid_size, samples } => {
            let fit_arm = |arm: Arm, component: usize| -> Result<Box<dyn QuantileModel>> {
                let n_arm = data.arm_indices(arm).len();
                let mut params = ForestParams::for_size(n_arm);
                if let Some(t) = n_trees {
                    params.n_trees = t;
                }
                let s = crate::rng::derive_seed(seed, &[arm.index() as u64, component as u64]);
                Ok(Box::new(fit_qrf(data, arm, component, &params, s)?))
            };
            Box::new(SamplerModel::fit_with(data, w.clone(), grid_size, samples, seed, fit_arm)?)
        }
        EstimatorSpec::KnnMean { k } => {
            Box::new(fit_baseline(data, w, BaselineLearner::KnnMean { k: k.resolve(data.len()) }, seed)?)
        }
        EstimatorSpec::Ridge { alpha } => {
            Box::new(fit_baseline(data, w, BaselineLearner::Ridge { alpha }, seed)?)
        }
        EstimatorSpec::ForestMean { n_trees } => {
            Box::new(fit_baseline(data, w, BaselineLearner::ForestMean { n_trees }, seed)?)
        }
        EstimatorSpec::Oracle => unreachable!("handled above"),
    })
}

/// The generating process's closed forms exposed as a fitted model.
#[derive(Debug, Clone)]
pub struct OracleModel {
    dgp: OracleDgp,
    w: Preference,
}

impl OracleModel {
    pub fn new(dgp: OracleDgp, w: Preference) -> Result<Self> {
        let expected = dgp.preference();
        if w.kind() != expected.kind() || w.orientation() != expected.orientation() {
            return Err(CpteError::InvalidInput(format!(
                "oracle closed forms are available only for the {:?} preference",
                expected.kind()
            )));
        }
        Ok(Self { dgp, w })
    }

    pub fn dgp(&self) -> &OracleDgp {
        &self.dgp
    }
}

impl CpteModel for OracleModel {
    fn preference(&self) -> &Preference {
        &self.w
    }

    fn cpte(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (a, b) = (self.dgp.q_w(x), self.dgp.q_l(x));
        Ok(if self.w.is_reversed() { (b, a) } else { (a, b) })
    }

    fn p_hat(&self, x: &[f64], arm: Arm, y: &[f64]) -> Result<(f64, f64)> {
        let (a, b) = self.dgp.p(x, arm, y);
        Ok(if self.w.is_reversed() { (b, a) } else { (a, b) })
    }

    fn summary(&self) -> String {
        "oracle".into()
    }
}

/// Deterministic per-query hash of a covariate vector.
pub(crate) fn hash_point(x: &[f64]) -> u64 {
    x.iter()
        .fold(0x243F_6A88_85A3_08D3u64, |h, v| crate::rng::splitmix64(h ^ v.to_bits()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_schedule() {
        assert_eq!(KSpec::Rule(KRule::One).resolve(10_000), 1);
        assert_eq!(KSpec::Rule(KRule::Log).resolve(10_000), 10);
        assert_eq!(KSpec::Rule(KRule::TwoLog).resolve(10_000), 19);
        assert_eq!(KSpec::Rule(KRule::Log).resolve(30), 4);
        assert_eq!(KSpec::Fixed(7).resolve(3), 7);
    }

    #[test]
    fn spec_round_trips_and_rejects_unknown_fields() {
        let spec: EstimatorSpec = serde_json::from_str(r#"{"kind":"knn","k":"two_log"}"#).unwrap();
        assert_eq!(spec, EstimatorSpec::Knn { k: KSpec::Rule(KRule::TwoLog) });
        let spec: EstimatorSpec = serde_json::from_str(r#"{"kind":"knn","k":3}"#).unwrap();
        assert_eq!(spec, EstimatorSpec::Knn { k: KSpec::Fixed(3) });
        assert!(serde_json::from_str::<EstimatorSpec>(r#"{"kind":"knn","kk":3}"#).is_err());
        assert_eq!(EstimatorSpec::linear_quantile().name(), "linear_quantile");
    }

    #[test]
    fn unbounded_preference_rejected() {
        let data = Dataset::new(
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            vec![true, false],
            Matrix::column_vector(vec![1.0, 0.0]),
        )
        .unwrap();
        let r = fit_estimator(&EstimatorSpec::knn(), &data, &Preference::risk_difference(), 0, None);
        assert!(matches!(r, Err(CpteError::UnboundedPreference)));
    }
}
