use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::constraint::{Condition, JointConstraint, Linkage, Reachability};
use super::spec::{
    ConditionSpec, ConstraintKind, EnumeratedParams, IfThenParams, InterventionModelSpec,
    JointConstraintSpec, LinkageParams, Relation, ThermometerParams, ValueType,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One invariant breach, tied to the feature or constraint it concerns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn warning(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.subject, self.message)
    }
}

/// Checks every invariant of the declared model. An empty list means the
/// model compiles.
pub fn validate(spec: &InterventionModelSpec) -> Vec<Diagnostic> {
    compile(spec).1
}

/// Resolves names and decodes constraint parameters. Constraints that fail
/// to decode are left out of the returned list.
pub(super) fn compile(spec: &InterventionModelSpec) -> (Vec<JointConstraint>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut index = HashMap::new();
    for (j, f) in spec.features.iter().enumerate() {
        let subject = format!("feature {}", f.name);
        if index.insert(f.name.as_str(), j).is_some() {
            diags.push(Diagnostic::error(&subject, "duplicate feature name"));
        }
        if !(f.lb.is_finite() && f.ub.is_finite()) {
            diags.push(Diagnostic::error(&subject, "bounds must be finite"));
        } else if f.lb > f.ub {
            diags.push(Diagnostic::error(&subject, format!("lb {} > ub {}", f.lb, f.ub)));
        }
        match f.vtype {
            ValueType::Binary if f.lb != 0.0 || f.ub != 1.0 => {
                diags.push(Diagnostic::error(&subject, "binary features need lb = 0, ub = 1"))
            }
            ValueType::Integer if f.lb.fract() != 0.0 || f.ub.fract() != 0.0 => {
                diags.push(Diagnostic::error(&subject, "integer features need integer bounds"))
            }
            _ => {}
        }
    }

    let mut downstream = HashSet::new();
    for name in &spec.downstream {
        match index.get(name.as_str()) {
            Some(&j) => {
                downstream.insert(j);
            }
            None => diags.push(Diagnostic::error(
                format!("downstream {name}"),
                "unknown feature",
            )),
        }
    }

    let mut compiled = Vec::new();
    for (ci, c) in spec.constraints.iter().enumerate() {
        let subject = format!("constraint #{ci} ({})", c.kind);
        let before = diags.len();
        let mut members = Vec::new();
        for m in &c.members {
            match index.get(m.as_str()) {
                Some(&j) => members.push(j),
                None => diags.push(Diagnostic::error(&subject, format!("unknown member {m}"))),
            }
        }
        if c.members.len() < 2 {
            diags.push(Diagnostic::error(&subject, "needs at least two members"));
        }
        if members.iter().collect::<HashSet<_>>().len() != members.len() {
            diags.push(Diagnostic::error(&subject, "repeated member"));
        }
        if diags.len() > before {
            continue;
        }
        let mut ctx = Ctx {
            spec,
            index: &index,
            downstream: &downstream,
            subject: &subject,
            diags: &mut diags,
        };
        if let Some(jc) = ctx.decode(c, &members) {
            if ctx.diags.len() == before {
                compiled.push(jc);
            }
        }
    }

    // inequality-linkage targets get their change drawn at random, so no
    // other constraint may pin them
    let mut use_count: HashMap<usize, usize> = HashMap::new();
    for jc in &compiled {
        for m in jc.members() {
            *use_count.entry(m).or_default() += 1;
        }
    }
    for jc in &compiled {
        if let JointConstraint::DirectionalLinkage(l) = jc {
            if l.relation != Relation::Equal {
                for &t in &l.targets {
                    if use_count[&t] > 1 {
                        diags.push(Diagnostic::error(
                            format!("feature {}", spec.features[t].name),
                            "target of an inequality linkage may not appear in other constraints",
                        ));
                    }
                }
            }
        }
    }
    (compiled, diags)
}

struct Ctx<'a> {
    spec: &'a InterventionModelSpec,
    index: &'a HashMap<&'a str, usize>,
    downstream: &'a HashSet<usize>,
    subject: &'a str,
    diags: &'a mut Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn err(&mut self, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(self.subject, msg));
    }

    fn params<T: DeserializeOwned>(&mut self, c: &JointConstraintSpec) -> Option<T> {
        match serde_json::from_value(c.parameters.clone()) {
            Ok(p) => Some(p),
            Err(e) => {
                self.err(format!("bad parameters: {e}"));
                None
            }
        }
    }

    fn resolve(&mut self, name: &str, members: &[usize]) -> Option<usize> {
        match self.index.get(name) {
            Some(&j) if members.contains(&j) => Some(j),
            Some(_) => {
                self.err(format!("{name} is not listed in members"));
                None
            }
            None => {
                self.err(format!("unknown feature {name}"));
                None
            }
        }
    }

    fn decode(&mut self, c: &JointConstraintSpec, members: &[usize]) -> Option<JointConstraint> {
        match c.kind {
            ConstraintKind::DirectionalLinkage => {
                let p: LinkageParams = self.params(c)?;
                self.linkage(p, members).map(JointConstraint::DirectionalLinkage)
            }
            ConstraintKind::ThermometerEncoding => {
                let p: ThermometerParams = self.params(c)?;
                for &j in members {
                    if self.spec.features[j].vtype != ValueType::Binary {
                        self.err(format!("dummy {} is not binary", self.spec.features[j].name));
                    }
                }
                let values = Reachability::thermometer_codes(members.len());
                let matrix = self.matrix(&p.reachability.materialize(values.len()), values.len())?;
                Some(JointConstraint::ThermometerEncoding(Reachability {
                    members: members.to_vec(),
                    values,
                    matrix,
                }))
            }
            ConstraintKind::IfThen => {
                let p: IfThenParams = self.params(c)?;
                let antecedent = self.condition(&p.antecedent, members)?;
                let consequent = self.condition(&p.consequent, members)?;
                Some(JointConstraint::IfThen {
                    antecedent,
                    consequent,
                })
            }
            ConstraintKind::EnumeratedReachability => {
                let p: EnumeratedParams = self.params(c)?;
                if p.values.is_empty() {
                    self.err("no value tuples");
                    return None;
                }
                for (i, v) in p.values.iter().enumerate() {
                    if v.len() != members.len() {
                        self.err(format!("tuple {i} has {} values for {} members", v.len(), members.len()));
                        return None;
                    }
                    for (&val, &j) in v.iter().zip(members) {
                        let f = &self.spec.features[j];
                        if !(val >= f.lb && val <= f.ub) {
                            self.err(format!("tuple {i}: {} = {val} outside bounds", f.name));
                        }
                    }
                    if p.values[..i].contains(v) {
                        self.err(format!("tuple {i} repeats an earlier tuple"));
                    }
                }
                let matrix = self.matrix(&p.reachability.materialize(p.values.len()), p.values.len())?;
                Some(JointConstraint::EnumeratedReachability(Reachability {
                    members: members.to_vec(),
                    values: p.values,
                    matrix,
                }))
            }
        }
    }

    fn linkage(&mut self, p: LinkageParams, members: &[usize]) -> Option<Linkage> {
        let source = self.resolve(&p.source, members)?;
        let mut targets = Vec::new();
        for t in &p.targets {
            targets.push(self.resolve(t, members)?);
        }
        if targets.is_empty() {
            self.err("no targets");
        }
        if targets.len() != p.scale.len() {
            self.err(format!("{} targets but {} scale entries", targets.len(), p.scale.len()));
        }
        if p.scale.iter().any(|s| !s.is_finite()) {
            self.err("scale entries must be finite");
        }
        if targets.contains(&source) {
            self.err("source cannot be its own target");
        }
        if self.downstream.contains(&source) {
            self.err(format!("source {} is downstream", p.source));
        }
        for (&t, name) in targets.iter().zip(&p.targets) {
            if !self.downstream.contains(&t) {
                self.err(format!("target {name} is not declared downstream"));
            }
        }
        if members.len() != targets.len() + 1 {
            self.err("members must be exactly the source and targets");
        }
        Some(Linkage {
            source,
            targets,
            scale: p.scale,
            relation: p.relation,
        })
    }

    fn condition(&mut self, c: &ConditionSpec, members: &[usize]) -> Option<Condition> {
        if !c.value.is_finite() {
            self.err("condition value must be finite");
        }
        Some(Condition {
            feature: self.resolve(&c.feature, members)?,
            comparator: c.comparator,
            value: c.value,
        })
    }

    fn matrix(&mut self, m: &[Vec<u8>], size: usize) -> Option<Vec<Vec<bool>>> {
        if m.len() != size || m.iter().any(|r| r.len() != size) {
            self.err(format!("reachability matrix must be {size}x{size}"));
            return None;
        }
        if m.iter().flatten().any(|&v| v > 1) {
            self.err("reachability entries must be 0 or 1");
        }
        if (0..size).any(|i| m[i][i] != 1) {
            self.err("reachability diagonal must be all ones");
        }
        Some(m.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect())
    }
}
