use serde::{Deserialize, Serialize};

use super::{Prediction, TargetError};

/// The target set Y_target(x). `flip-of-current` and `below-current` are
/// defined relative to the origin's own prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictionTarget {
    LabelSet {
        labels: Vec<String>,
    },
    Interval {
        lo: f64,
        hi: f64,
        #[serde(default)]
        lo_open: bool,
        #[serde(default)]
        hi_open: bool,
    },
    FlipOfCurrent,
    BelowCurrent,
}

impl PredictionTarget {
    pub fn problem(&self) -> Option<String> {
        match self {
            PredictionTarget::LabelSet { labels } if labels.is_empty() => {
                Some("label set is empty".into())
            }
            PredictionTarget::Interval { lo, hi, .. } if !(lo <= hi) => {
                Some(format!("interval [{lo}, {hi}] is empty"))
            }
            _ => None,
        }
    }

    /// Whether membership ignores the baseline prediction.
    pub fn is_fixed_set(&self) -> bool {
        matches!(self, PredictionTarget::LabelSet { .. } | PredictionTarget::Interval { .. })
    }

    pub fn contains(&self, pred: &Prediction, baseline: &Prediction) -> Result<bool, TargetError> {
        match self {
            PredictionTarget::LabelSet { labels } => match pred {
                Prediction::Label(l) => Ok(labels.contains(l)),
                Prediction::Score(_) => Err(TargetError::Mismatch {
                    target: "label-set",
                    got: "score",
                }),
            },
            PredictionTarget::Interval {
                lo,
                hi,
                lo_open,
                hi_open,
            } => {
                let v = score_of(pred, "interval")?;
                let above = if *lo_open { v > *lo } else { v >= *lo };
                let below = if *hi_open { v < *hi } else { v <= *hi };
                Ok(above && below)
            }
            PredictionTarget::FlipOfCurrent => match (pred, baseline) {
                (Prediction::Label(a), Prediction::Label(b)) => Ok(a != b),
                (Prediction::Score(a), Prediction::Score(b)) => Ok(a != b),
                _ => Err(TargetError::Mismatch {
                    target: "flip-of-current",
                    got: "mixed labels and scores",
                }),
            },
            PredictionTarget::BelowCurrent => {
                Ok(score_of(pred, "below-current")? < score_of(baseline, "below-current")?)
            }
        }
    }
}

fn score_of(p: &Prediction, target: &'static str) -> Result<f64, TargetError> {
    match p {
        Prediction::Score(v) => Ok(*v),
        Prediction::Label(_) => Err(TargetError::Mismatch { target, got: "label" }),
    }
}
