//! Declared (name-based) form of an intervention model, as read from the
//! JSON configuration.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Integer,
    Real,
    Binary,
}

impl ValueType {
    pub fn is_discrete(self) -> bool {
        !matches!(self, ValueType::Real)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    #[default]
    Free,
    IncreaseOnly,
    DecreaseOnly,
}

impl Sign {
    pub fn can_increase(self) -> bool {
        !matches!(self, Sign::DecreaseOnly)
    }

    pub fn can_decrease(self) -> bool {
        !matches!(self, Sign::IncreaseOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub vtype: ValueType,
    pub lb: f64,
    pub ub: f64,
    pub actionable: bool,
    #[serde(default)]
    pub sign: Sign,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, vtype: ValueType, lb: f64, ub: f64) -> Self {
        Self {
            name: name.into(),
            vtype,
            lb,
            ub,
            actionable: true,
            sign: Sign::Free,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, ValueType::Binary, 0.0, 1.0)
    }

    pub fn immutable(mut self) -> Self {
        self.actionable = false;
        self
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    DirectionalLinkage,
    ThermometerEncoding,
    IfThen,
    EnumeratedReachability,
}

impl std::fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConstraintKind::DirectionalLinkage => "DirectionalLinkage",
            ConstraintKind::ThermometerEncoding => "ThermometerEncoding",
            ConstraintKind::IfThen => "IfThen",
            ConstraintKind::EnumeratedReachability => "EnumeratedReachability",
        };
        f.write_str(s)
    }
}

/// A joint constraint as written in the configuration. `parameters` is
/// decoded per `kind` during validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConstraintSpec {
    pub kind: ConstraintKind,
    pub members: Vec<String>,
    #[serde(default)]
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageParams {
    pub source: String,
    pub targets: Vec<String>,
    pub scale: Vec<f64>,
    #[serde(default = "default_relation")]
    pub relation: Relation,
}

fn default_relation() -> Relation {
    Relation::Equal
}

/// Reachability matrix, either explicit or one of the three standard shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReachabilitySpec {
    Named(ReachabilityShape),
    Matrix(Vec<Vec<u8>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReachabilityShape {
    /// Row i reaches columns j >= i.
    Upper,
    /// Row i reaches columns j <= i.
    Lower,
    All,
    Identity,
}

impl ReachabilitySpec {
    pub fn materialize(&self, size: usize) -> Vec<Vec<u8>> {
        match self {
            ReachabilitySpec::Matrix(m) => m.clone(),
            ReachabilitySpec::Named(shape) => (0..size)
                .map(|i| {
                    (0..size)
                        .map(|j| {
                            let ok = match shape {
                                ReachabilityShape::Upper => j >= i,
                                ReachabilityShape::Lower => j <= i,
                                ReachabilityShape::All => true,
                                ReachabilityShape::Identity => i == j,
                            };
                            u8::from(ok)
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometerParams {
    pub reachability: ReachabilitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        let eq = (lhs - rhs).abs() <= super::VALUE_TOL;
        match self {
            Comparator::Eq => eq,
            Comparator::Ne => !eq,
            Comparator::Lt => lhs < rhs && !eq,
            Comparator::Le => lhs < rhs || eq,
            Comparator::Gt => lhs > rhs && !eq,
            Comparator::Ge => lhs > rhs || eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub feature: String,
    pub comparator: Comparator,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfThenParams {
    pub antecedent: ConditionSpec,
    pub consequent: ConditionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumeratedParams {
    pub values: Vec<Vec<f64>>,
    pub reachability: ReachabilitySpec,
}

/// Declared intervention model: features, joint constraints and the
/// effect-only (downstream) feature set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InterventionModelSpec {
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub constraints: Vec<JointConstraintSpec>,
    #[serde(default)]
    pub downstream: Vec<String>,
}

impl InterventionModelSpec {
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}
