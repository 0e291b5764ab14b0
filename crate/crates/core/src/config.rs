//! The JSON configuration document and its resolution into runnable parts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::effects::{deterministic_constraints, EffectError, EffectModel, EffectSpec};
use crate::intervention::{
    FeatureSpec, InterventionModel, InterventionModelSpec, JointConstraintSpec, ModelError,
};
use crate::model_io::{ModelSpec, PredictionTarget};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Effect(#[from] EffectError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Estimate,
    #[default]
    Test,
}

/// Settings under the `audit` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    #[serde(default)]
    pub mode: Mode,
    /// Samples per point; derived from the sample-size inputs when absent.
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    /// Target interval width for estimate mode.
    #[serde(default)]
    pub width: Option<f64>,
    /// Only points whose baseline prediction lies in this set are audited.
    #[serde(default)]
    pub filter: Option<PredictionTarget>,
    /// Run test mode even when n cannot reach a rejection.
    #[serde(default)]
    pub allow_trivial_test: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_budget() -> u64 {
    crate::sampler::DEFAULT_BUDGET
}

impl Default for AuditSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub constraints: Vec<JointConstraintSpec>,
    #[serde(default)]
    pub downstream: Vec<String>,
    #[serde(default)]
    pub effects: Vec<EffectSpec>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub target: Option<PredictionTarget>,
    #[serde(default)]
    pub audit: AuditSettings,
}

/// Sample size and test parameters after derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditPlan {
    pub mode: Mode,
    pub n: u64,
    pub alpha: f64,
    pub epsilon: Option<f64>,
    /// Whether n clears the necessary bound for a rejection to be possible.
    pub can_reject: bool,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub file: ConfigFile,
    pub model: InterventionModel,
    pub effects: EffectModel,
    /// Hex SHA-256 of the canonical (key-sorted) JSON document.
    pub hash: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let hash = hex::encode(Sha256::digest(value.to_string().as_bytes()));
        let file: ConfigFile = serde_json::from_value(value)?;
        Self::from_file(file, hash)
    }

    pub fn from_file(file: ConfigFile, hash: String) -> Result<Self, ConfigError> {
        let spec = file.intervention_spec();
        let model = InterventionModel::from_spec(&spec)?;
        let effects = EffectModel::compile(&file.effects, &model)?;
        if let Some(t) = &file.target {
            if let Some(p) = t.problem() {
                return Err(ConfigError::Invalid(format!("target: {p}")));
            }
        }
        if let Some(f) = &file.audit.filter {
            if !f.is_fixed_set() {
                return Err(ConfigError::Invalid(
                    "filter must be a label-set or interval".into(),
                ));
            }
            if let Some(p) = f.problem() {
                return Err(ConfigError::Invalid(format!("filter: {p}")));
            }
        }
        Ok(Self {
            file,
            model,
            effects,
            hash,
        })
    }

    pub fn model_spec(&self) -> Result<&ModelSpec, ConfigError> {
        self.file
            .model
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("configuration has no `model`".into()))
    }

    pub fn target(&self) -> Result<&PredictionTarget, ConfigError> {
        self.file
            .target
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("configuration has no `target`".into()))
    }

    pub fn plan(&self, mode: Mode) -> Result<AuditPlan, ConfigError> {
        let a = &self.file.audit;
        let alpha = a.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ConfigError::Invalid(format!("alpha {alpha} outside (0, 1)")));
        }
        if let Some(e) = a.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::Invalid(format!("epsilon {e} outside (0, 1)")));
            }
        }
        let n = match (mode, a.n) {
            (_, Some(0)) => return Err(ConfigError::Invalid("n must be at least 1".into())),
            (_, Some(n)) => n,
            (Mode::Estimate, None) => {
                let width = a.width.ok_or_else(|| {
                    ConfigError::Invalid("estimate mode needs `n` or `width`".into())
                })?;
                stats::min_n_estimation(alpha, width)?
            }
            (Mode::Test, None) => {
                let (Some(eps), Some(beta)) = (a.epsilon, a.beta) else {
                    return Err(ConfigError::Invalid(
                        "test mode needs `n`, or `epsilon` and `beta` to derive it".into(),
                    ));
                };
                let delta = a.delta.unwrap_or(eps / 2.0);
                stats::min_n_test(alpha, beta, eps, delta)?
                    .max(stats::necessary_n_integer(alpha, eps)?)
            }
        };
        let can_reject = match a.epsilon {
            Some(eps) => n as f64 > stats::necessary_n(alpha, eps)?,
            None => false,
        };
        if mode == Mode::Test {
            let eps = a
                .epsilon
                .ok_or_else(|| ConfigError::Invalid("test mode needs `epsilon`".into()))?;
            if !can_reject && !a.allow_trivial_test {
                return Err(ConfigError::Invalid(format!(
                    "n = {n} cannot reject at alpha = {alpha}, epsilon = {eps}: need n > {:.3}; \
                     set audit.allow_trivial_test to run anyway",
                    stats::necessary_n(alpha, eps)?
                )));
            }
        }
        Ok(AuditPlan {
            mode,
            n,
            alpha,
            epsilon: a.epsilon,
            can_reject,
        })
    }
}

impl ConfigFile {
    /// Intervention model with `Deterministic` effects merged in as linkages.
    pub fn intervention_spec(&self) -> InterventionModelSpec {
        let mut constraints = self.constraints.clone();
        constraints.extend(deterministic_constraints(&self.effects));
        InterventionModelSpec {
            features: self.features.clone(),
            constraints,
            downstream: self.downstream.clone(),
        }
    }
}
