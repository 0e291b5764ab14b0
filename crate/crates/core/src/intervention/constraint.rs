//! Index-resolved joint constraints and their predicates.

use super::spec::{Comparator, FeatureSpec, Relation};
use super::VALUE_TOL;

/// A change on `source` induces a scaled change on each target.
#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    pub source: usize,
    pub targets: Vec<usize>,
    pub scale: Vec<f64>,
    pub relation: Relation,
}

impl Linkage {
    /// Nominal induced change s_l * a_k on target position `t`, floored onto the
    /// integer lattice for discrete targets.
    pub fn nominal_change(&self, t: usize, source_action: f64, target: &FeatureSpec) -> f64 {
        let raw = self.scale[t] * source_action;
        if target.vtype.is_discrete() {
            (raw + VALUE_TOL).floor()
        } else {
            raw
        }
    }

    /// Admissible range of the induced change on target position `t` for an
    /// inequality linkage. The change keeps the sign of s_l * a_k: `at-most`
    /// spans [0, s a] (ordered), `at-least` runs from s a outward to the
    /// feature bound. Returns `None` when the range misses the feature bounds
    /// (or, for discrete targets, contains no lattice point).
    pub fn inequality_range(
        &self,
        t: usize,
        source_action: f64,
        target_value: f64,
        target: &FeatureSpec,
    ) -> Option<(f64, f64)> {
        let nominal = self.scale[t] * source_action;
        let room_up = target.ub - target_value;
        let room_down = target.lb - target_value;
        let (lo, hi) = match self.relation {
            Relation::Equal => (nominal, nominal),
            Relation::AtMost => (nominal.min(0.0), nominal.max(0.0)),
            Relation::AtLeast => {
                if nominal > 0.0 {
                    (nominal, room_up)
                } else if nominal < 0.0 {
                    (room_down, nominal)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        let lo = lo.max(room_down);
        let hi = hi.min(room_up);
        if target.vtype.is_discrete() {
            let lo = (lo - VALUE_TOL).ceil();
            let hi = (hi + VALUE_TOL).floor();
            (lo <= hi).then_some((lo, hi))
        } else {
            (lo <= hi + VALUE_TOL).then_some((lo, hi.max(lo)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub comparator: Comparator,
    pub value: f64,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        self.comparator.holds(x[self.feature], self.value)
    }
}

/// Members must take one of the tuples in `values`; moving from the current
/// tuple i to tuple k requires `matrix[i][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reachability {
    pub members: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub matrix: Vec<Vec<bool>>,
}

impl Reachability {
    /// Index of the tuple matching `x` on the members.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.values.iter().position(|v| {
            v.iter()
                .zip(&self.members)
                .all(|(val, &j)| (x[j] - val).abs() <= VALUE_TOL)
        })
    }

    pub fn holds(&self, x: &[f64], x_post: &[f64]) -> bool {
        match (self.locate(x), self.locate(x_post)) {
            (Some(i), Some(k)) => self.matrix[i][k],
            // an inconsistent origin only admits the null change on the members
            (None, _) => self
                .members
                .iter()
                .all(|&j| (x[j] - x_post[j]).abs() <= VALUE_TOL),
            (Some(_), None) => false,
        }
    }

    /// Thermometer codes over `m` ordered dummies: code k has the first k set.
    pub fn thermometer_codes(m: usize) -> Vec<Vec<f64>> {
        (0..=m)
            .map(|k| (0..m).map(|j| if j < k { 1.0 } else { 0.0 }).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointConstraint {
    DirectionalLinkage(Linkage),
    ThermometerEncoding(Reachability),
    IfThen {
        antecedent: Condition,
        consequent: Condition,
    },
    EnumeratedReachability(Reachability),
}

impl JointConstraint {
    pub fn kind(&self) -> super::ConstraintKind {
        use super::ConstraintKind as K;
        match self {
            JointConstraint::DirectionalLinkage(_) => K::DirectionalLinkage,
            JointConstraint::ThermometerEncoding(_) => K::ThermometerEncoding,
            JointConstraint::IfThen { .. } => K::IfThen,
            JointConstraint::EnumeratedReachability(_) => K::EnumeratedReachability,
        }
    }

    pub fn members(&self) -> Vec<usize> {
        match self {
            JointConstraint::DirectionalLinkage(l) => {
                std::iter::once(l.source).chain(l.targets.iter().copied()).collect()
            }
            JointConstraint::ThermometerEncoding(r) | JointConstraint::EnumeratedReachability(r) => {
                r.members.clone()
            }
            JointConstraint::IfThen {
                antecedent,
                consequent,
            } => vec![antecedent.feature, consequent.feature],
        }
    }

    /// Evaluates the constraint for origin `x` and post-intervention vector
    /// `x_post` (x + a plus equal-relation linked changes). Leaving every
    /// member unchanged always satisfies the constraint, so the null action
    /// stays feasible even when `x` itself is inconsistent.
    pub fn holds(&self, x: &[f64], x_post: &[f64], features: &[FeatureSpec]) -> bool {
        if self.members().iter().all(|&j| x_post[j] == x[j]) {
            return true;
        }
        match self {
            JointConstraint::DirectionalLinkage(l) => {
                let source_action = x_post[l.source] - x[l.source];
                l.targets.iter().enumerate().all(|(t, &j)| {
                    let f = &features[j];
                    match l.relation {
                        Relation::Equal => {
                            x_post[j] >= f.lb - VALUE_TOL && x_post[j] <= f.ub + VALUE_TOL
                        }
                        _ => l.inequality_range(t, source_action, x_post[j], f).is_some(),
                    }
                })
            }
            JointConstraint::ThermometerEncoding(r) | JointConstraint::EnumeratedReachability(r) => {
                r.holds(x, x_post)
            }
            JointConstraint::IfThen {
                antecedent,
                consequent,
            } => !antecedent.holds(x_post) || consequent.holds(x_post),
        }
    }
}
