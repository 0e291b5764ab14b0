use serde::{Deserialize, Serialize};

use super::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

/// score = link(w·x + b), labeled by `threshold` when one is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub link: Link,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Labels below and at-or-above the threshold.
    #[serde(default = "default_labels")]
    pub labels: [String; 2],
}

fn default_labels() -> [String; 2] {
    ["0".to_string(), "1".to_string()]
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64, link: Link) -> Self {
        Self {
            weights,
            intercept,
            link,
            threshold: None,
            labels: default_labels(),
        }
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self
            .weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v);
        match self.link {
            Link::Identity => z,
            Link::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let s = self.score(x);
        match self.threshold {
            None => Prediction::Score(s),
            Some(t) => Prediction::Label(self.labels[usize::from(s >= t)].clone()),
        }
    }
}
