use std::path::Path;

use cpte_core::distest::EstimatorSpec;
use cpte_core::harness::{DgpSpec, ExperimentConfig, PolicyMethod};
use cpte_core::policy::{PolicyClass, PropensitySpec};
use cpte_core::{Preference, PreferenceKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a command may read from a run config. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub with_oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgp: Option<DgpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<PreferenceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<PolicyMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learn: Option<LearnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceConfig {
    pub kind: PreferenceKind,
    /// `+1` (larger is better) or `-1` per outcome coordinate; all `+1` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<f64>>,
}

/// Grid settings; omitted fields take the harness defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_grid: Vec<usize>,
    pub repetitions: Option<usize>,
    pub eval_n: Option<usize>,
    pub bootstrap_b: Option<usize>,
    pub folds: Option<usize>,
    pub propensity: Option<PropensitySpec>,
    pub one_step_values: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceMode {
    /// Out-of-fold nuisances from the configured estimator.
    #[default]
    CrossFit,
    /// Closed-form nuisances of the configured generating process.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    PlugIn,
    #[default]
    OneStep,
}

fn default_policy() -> PolicyClass {
    PolicyClass::Tree { depth: 2 }
}
fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    #[serde(default = "default_policy")]
    pub policy: PolicyClass,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub nuisance: NuisanceMode,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub propensity: PropensitySpec,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            objective: Objective::default(),
            nuisance: NuisanceMode::default(),
            folds: default_folds(),
            propensity: PropensitySpec::default(),
        }
    }
}

/// Column roles of an external CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub treatment: String,
    pub outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orientation: Vec<f64>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub continuous: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Schema(format!("config error at `{path}`: {}", e.into_inner().message()))
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Preference for outcomes of dimension `dim`: the configured one, else the
    /// generating process's, else the indicator (d = 1) or lexicographic win.
    pub fn resolve_preference(&self, dim: usize) -> Result<Preference, CliError> {
        let w = match (&self.preference, &self.dgp) {
            (Some(p), _) => {
                let orientation = p.orientation.clone().unwrap_or_else(|| vec![1.0; dim]);
                Preference::new(p.kind, orientation).map_err(|e| CliError::Schema(format!("preference: {e}")))?
            }
            (None, Some(d)) => d.preference(),
            (None, None) if dim == 1 => Preference::pns(),
            (None, None) => Preference::lexicographic(dim),
        };
        if w.dim() != dim {
            return Err(CliError::Schema(format!(
                "preference expects {} outcome column(s), data has {dim}",
                w.dim()
            )));
        }
        Ok(w)
    }

    pub fn require_dgp(&self) -> Result<&DgpSpec, CliError> {
        self.dgp
            .as_ref()
            .ok_or_else(|| CliError::Schema("config error at `dgp`: section required by this command".into()))
    }

    pub fn estimators_or_default(&self) -> Vec<EstimatorSpec> {
        if self.estimators.is_empty() {
            vec![EstimatorSpec::knn()]
        } else {
            self.estimators.clone()
        }
    }

    /// Fills every defaulted experiment field so the echo is self-contained.
    pub fn resolve_experiment(&mut self) -> Result<ExperimentConfig, CliError> {
        let dgp = self.require_dgp()?.clone();
        let sec = self
            .experiment
            .as_mut()
            .ok_or_else(|| CliError::Schema("config error at `experiment`: section required by this command".into()))?;
        let mut cfg = ExperimentConfig::new(dgp, self.estimators.clone(), self.methods.clone(), sec.n_grid.clone());
        cfg.master_seed = self.seed;
        cfg.repetitions = *sec.repetitions.get_or_insert(cfg.repetitions);
        cfg.eval_n = *sec.eval_n.get_or_insert(cfg.eval_n);
        cfg.bootstrap_b = *sec.bootstrap_b.get_or_insert(cfg.bootstrap_b);
        cfg.folds = *sec.folds.get_or_insert(cfg.folds);
        cfg.propensity = *sec.propensity.get_or_insert(cfg.propensity);
        cfg.one_step_values = *sec.one_step_values.get_or_insert(cfg.one_step_values);
        cfg.validate().map_err(|e| CliError::Schema(format!("experiment config: {e}")))?;
        Ok(cfg)
    }
}
