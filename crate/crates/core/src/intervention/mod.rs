//! Feature space, intervention set A(x), feasibility checks and the
//! independent-block partition.

mod constraint;
mod model;
mod partition;
mod spec;
mod validate;

pub use constraint::{Condition, JointConstraint, Linkage, Reachability};
pub use model::InterventionModel;
pub use partition::Partition;
pub use spec::{
    Comparator, ConditionSpec, ConstraintKind, EnumeratedParams, FeatureSpec, IfThenParams,
    InterventionModelSpec, JointConstraintSpec, LinkageParams, ReachabilityShape,
    ReachabilitySpec, Relation, Sign, ThermometerParams, ValueType,
};
pub use validate::{validate, Diagnostic, Severity};

use thiserror::Error;

/// Absolute tolerance for value comparisons (equality tests, bounds).
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid intervention model: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("feature {feature} = {value} lies outside [{lb}, {ub}]")]
    OutOfBounds {
        feature: String,
        value: f64,
        lb: f64,
        ub: f64,
    },
    #[error("point has {got} values, model has {want} features")]
    Dimension { got: usize, want: usize },
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}
