use std::collections::HashMap;

use super::constraint::{JointConstraint, Linkage};
use super::partition::Partition;
use super::spec::{FeatureSpec, InterventionModelSpec, Relation};
use super::validate::{compile, Diagnostic, Severity};
use super::{ModelError, VALUE_TOL};

/// A validated intervention model with names resolved to indices.
#[derive(Debug, Clone)]
pub struct InterventionModel {
    features: Vec<FeatureSpec>,
    constraints: Vec<JointConstraint>,
    downstream: Vec<bool>,
    names: HashMap<String, usize>,
}

impl InterventionModel {
    pub fn from_spec(spec: &InterventionModelSpec) -> Result<Self, ModelError> {
        let (constraints, diags) = compile(spec);
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Err(ModelError::Invalid(diags));
        }
        let names: HashMap<String, usize> = spec
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| (f.name.clone(), j))
            .collect();
        let mut downstream = vec![false; spec.features.len()];
        for name in &spec.downstream {
            downstream[names[name]] = true;
        }
        Ok(Self {
            features: spec.features.clone(),
            constraints,
            downstream,
            names,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, j: usize) -> &FeatureSpec {
        &self.features[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.get(name).copied()
    }

    pub fn constraints(&self) -> &[JointConstraint] {
        &self.constraints
    }

    pub fn is_downstream(&self, j: usize) -> bool {
        self.downstream[j]
    }

    /// Whether feature `j` receives a directly sampled intervention.
    pub fn is_intervened(&self, j: usize) -> bool {
        self.features[j].actionable && !self.downstream[j]
    }

    pub fn linkages(&self) -> impl Iterator<Item = &Linkage> {
        self.constraints.iter().filter_map(|c| match c {
            JointConstraint::DirectionalLinkage(l) => Some(l),
            _ => None,
        })
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(ModelError::Dimension {
                got: x.len(),
                want: self.dim(),
            })
        }
    }

    /// Dimension and per-feature bounds of an origin point.
    pub fn check_origin(&self, x: &[f64]) -> Result<(), ModelError> {
        self.check_dim(x)?;
        for j in 0..self.dim() {
            self.action_bounds(x, j)?;
        }
        Ok(())
    }

    /// Signed bounds [LB_j(x), UB_j(x)] on the intervention a_j. Features that
    /// are immutable or downstream get [0, 0].
    pub fn action_bounds(&self, x: &[f64], j: usize) -> Result<(f64, f64), ModelError> {
        let f = &self.features[j];
        let v = x[j];
        if !(v >= f.lb - VALUE_TOL && v <= f.ub + VALUE_TOL) {
            return Err(ModelError::OutOfBounds {
                feature: f.name.clone(),
                value: v,
                lb: f.lb,
                ub: f.ub,
            });
        }
        if !self.is_intervened(j) {
            return Ok((0.0, 0.0));
        }
        let up = if f.sign.can_increase() { (f.ub - v).max(0.0) } else { 0.0 };
        let down = if f.sign.can_decrease() { (v - f.lb).max(0.0) } else { 0.0 };
        Ok((-down, up))
    }

    /// Changes on downstream targets fixed by `equal` linkages for action `a`.
    pub fn linked_changes(&self, a: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        for l in self.linkages().filter(|l| l.relation == Relation::Equal) {
            for (t, &j) in l.targets.iter().enumerate() {
                r[j] += l.nominal_change(t, a[l.source], &self.features[j]);
            }
        }
        r
    }

    /// x + a plus the `equal`-linkage changes.
    pub fn post_intervention(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        let r = self.linked_changes(a);
        x.iter()
            .zip(a)
            .zip(&r)
            .map(|((x, a), r)| x + a + r)
            .collect()
    }

    /// Whether `a` satisfies every joint constraint whose members all lie in
    /// `block`.
    pub fn check_feasibility(&self, x: &[f64], a: &[f64], block: &[usize]) -> bool {
        let post = self.post_intervention(x, a);
        self.constraints
            .iter()
            .filter(|c| c.members().iter().all(|m| block.contains(m)))
            .all(|c| c.holds(x, &post, &self.features))
    }

    /// Blocks over the constraint graph alone.
    pub fn partition(&self) -> Partition {
        self.partition_with(std::iter::empty())
    }

    /// Blocks over the constraint graph plus additional coupling edges
    /// (e.g. from effect models).
    pub fn partition_with(&self, extra: impl IntoIterator<Item = (usize, usize)>) -> Partition {
        let mut edges = Vec::new();
        for c in &self.constraints {
            let m = c.members();
            edges.extend(m.windows(2).map(|w| (w[0], w[1])));
        }
        edges.extend(extra);
        Partition::from_edges(self.dim(), edges)
    }

    /// Per-point diagnostics: out-of-bounds values are errors, an origin that
    /// itself violates a constraint is a warning.
    pub fn check_point(&self, x: &[f64]) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if let Err(e) = self.check_dim(x) {
            out.push(Diagnostic::error("point", e.to_string()));
            return out;
        }
        for (f, &v) in self.features.iter().zip(x) {
            if !v.is_finite() || v < f.lb - VALUE_TOL || v > f.ub + VALUE_TOL {
                out.push(Diagnostic::error(
                    format!("feature {}", f.name),
                    format!("value {v} outside [{}, {}]", f.lb, f.ub),
                ));
            } else if f.vtype.is_discrete() && (v - v.round()).abs() > VALUE_TOL {
                out.push(Diagnostic::warning(
                    format!("feature {}", f.name),
                    format!("non-integer value {v}"),
                ));
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            let consistent = match c {
                JointConstraint::DirectionalLinkage(_) => true,
                JointConstraint::ThermometerEncoding(r) | JointConstraint::EnumeratedReachability(r) => {
                    r.locate(x).is_some()
                }
                JointConstraint::IfThen {
                    antecedent,
                    consequent,
                } => !antecedent.holds(x) || consequent.holds(x),
            };
            if !consistent {
                out.push(Diagnostic::warning(
                    format!("constraint #{ci} ({})", c.kind()),
                    "observed point violates the constraint; audited as given",
                ));
            }
        }
        out
    }
}
