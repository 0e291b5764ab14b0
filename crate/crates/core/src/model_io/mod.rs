//! Black-box prediction access and target-set membership.

mod linear;
mod subprocess;
mod target;

pub use linear::{Link, LinearModel};
pub use subprocess::{SubprocessModel, MAX_BATCH, PROTOCOL_VERSION};
pub use target::PredictionTarget;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Score(f64),
    Label(String),
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Score(v) => write!(f, "{v}"),
            Prediction::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("could not start model process {0}")]
    Spawn(String),
    #[error("model transport failed: {message}{}", if .stderr.is_empty() { String::new() } else { format!("\nchild stderr:\n{}", .stderr) })]
    Transport { message: String, stderr: String },
    #[error("input {index} has a non-finite value")]
    NonFinite { index: usize },
    #[error("input {index} has {got} values, model expects {want}")]
    Dimension { index: usize, got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TargetError {
    #[error("{target} target cannot evaluate a {got} prediction")]
    Mismatch { target: &'static str, got: &'static str },
}

/// Model declaration under the `model` configuration key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    BuiltinLinear(LinearModel),
    #[serde(rename_all = "snake_case")]
    Subprocess {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

impl ModelSpec {
    /// Opens a handle; subprocess models start one child per call.
    pub fn open(&self, dim: usize) -> Result<ModelHandle, PredictError> {
        match self {
            ModelSpec::BuiltinLinear(m) => {
                if m.weights.len() != dim {
                    return Err(PredictError::Dimension {
                        index: 0,
                        got: m.weights.len(),
                        want: dim,
                    });
                }
                Ok(ModelHandle::Builtin(m.clone()))
            }
            ModelSpec::Subprocess { command, args } => Ok(ModelHandle::Subprocess {
                process: Box::new(SubprocessModel::spawn(command, args)?),
                dim,
            }),
        }
    }
}

pub enum ModelHandle {
    Builtin(LinearModel),
    Subprocess { process: Box<SubprocessModel>, dim: usize },
}

impl ModelHandle {
    fn dim(&self) -> usize {
        match self {
            ModelHandle::Builtin(m) => m.weights.len(),
            ModelHandle::Subprocess { dim, .. } => *dim,
        }
    }

    /// One prediction per input, in input order.
    pub fn predict_batch(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>, PredictError> {
        let want = self.dim();
        for (index, x) in xs.iter().enumerate() {
            if x.len() != want {
                return Err(PredictError::Dimension {
                    index,
                    got: x.len(),
                    want,
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(PredictError::NonFinite { index });
            }
        }
        match self {
            ModelHandle::Builtin(m) => Ok(xs.iter().map(|x| m.predict(x)).collect()),
            ModelHandle::Subprocess { process, .. } => process.predict_batch(xs),
        }
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<Prediction, PredictError> {
        Ok(self.predict_batch(&[x.to_vec()])?.remove(0))
    }
}
