//! Downstream effects r in x' = x + a + r: deterministic linkages, independent
//! noise and a structural causal model.

mod scm;

pub use scm::{cholesky, Equation, Scm, ScmDraw, StructuralEquation, Transform};

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervention::{
    ConstraintKind, Diagnostic, InterventionModel, JointConstraintSpec, LinkageParams, Relation,
    VALUE_TOL,
};

/// One entry under the `effects` configuration key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EffectSpec {
    /// Merged into the intervention model as directional-linkage constraints.
    Deterministic { links: Vec<LinkageParams> },
    IndependentNoise { noise: Vec<NoiseSpec> },
    #[serde(rename = "SCM")]
    Scm {
        variables: Vec<String>,
        /// Exogenous covariance, row-major.
        sigma: Vec<Vec<f64>>,
        equations: Vec<Equation>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub feature: String,
    pub distribution: Distribution,
    /// Replaces `distribution` when the intervention on `source` equals a
    /// listed value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by_action: Option<ByAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByAction {
    pub source: String,
    pub cases: Vec<ActionCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCase {
    pub action: f64,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std_dev: f64 },
    None,
}

impl Distribution {
    fn problem(&self) -> Option<String> {
        match *self {
            Distribution::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Some(format!("uniform range [{lo}, {hi}] is invalid"))
            }
            Distribution::Gaussian { mean, std_dev }
                if !(mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0) =>
            {
                Some(format!("gaussian({mean}, {std_dev}) is invalid"))
            }
            _ => None,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } if lo < hi => rng.random_range(lo..hi),
            Distribution::Uniform { lo, .. } => lo,
            Distribution::Gaussian { mean, std_dev } => Normal::new(mean, std_dev)
                .expect("validated at load")
                .sample(rng),
            Distribution::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EffectError {
    #[error("invalid effect model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// Directional-linkage constraints equivalent to the `Deterministic` entries.
pub fn deterministic_constraints(specs: &[EffectSpec]) -> Vec<JointConstraintSpec> {
    specs
        .iter()
        .filter_map(|s| match s {
            EffectSpec::Deterministic { links } => Some(links),
            _ => None,
        })
        .flatten()
        .map(|l| JointConstraintSpec {
            kind: ConstraintKind::DirectionalLinkage,
            members: std::iter::once(l.source.clone())
                .chain(l.targets.iter().cloned())
                .collect(),
            parameters: serde_json::to_value(l).expect("linkage params serialize"),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct NoiseEffect {
    feature: usize,
    default: Distribution,
    by_action: Option<(usize, Vec<(f64, Distribution)>)>,
}

/// Compiled random effects. Deterministic linkages live in the intervention
/// model and are applied from there.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EffectModel {
    noise: Vec<NoiseEffect>,
    scm: Option<Scm>,
}

impl EffectModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn compile(specs: &[EffectSpec], model: &InterventionModel) -> Result<Self, EffectError> {
        let mut diags = Vec::new();
        let mut owner: HashMap<usize, String> = HashMap::new();
        for (ci, l) in model.linkages().enumerate() {
            for &t in &l.targets {
                owner.entry(t).or_insert_with(|| format!("linkage #{ci}"));
            }
        }
        let mut claim = |j: usize, who: String, diags: &mut Vec<Diagnostic>| {
            let name = &model.feature(j).name;
            if !model.is_downstream(j) {
                diags.push(Diagnostic::error(&who, format!("{name} is not declared downstream")));
            }
            if let Some(prev) = owner.insert(j, who.clone()) {
                diags.push(Diagnostic::error(&who, format!("{name} already receives effects from {prev}")));
            }
        };
        let resolve = |name: &str, who: &str, diags: &mut Vec<Diagnostic>| {
            let j = model.index_of(name);
            if j.is_none() {
                diags.push(Diagnostic::error(who, format!("unknown feature {name}")));
            }
            j
        };

        let mut out = EffectModel::default();
        for (ei, spec) in specs.iter().enumerate() {
            match spec {
                EffectSpec::Deterministic { .. } => {}
                EffectSpec::IndependentNoise { noise } => {
                    for n in noise {
                        let who = format!("effect #{ei} noise on {}", n.feature);
                        let Some(j) = resolve(&n.feature, &who, &mut diags) else { continue };
                        claim(j, who.clone(), &mut diags);
                        let mut dists = vec![n.distribution];
                        let by_action = match &n.by_action {
                            None => None,
                            Some(b) => {
                                let src = resolve(&b.source, &who, &mut diags);
                                if let Some(s) = src {
                                    if !model.is_intervened(s) {
                                        diags.push(Diagnostic::error(&who, format!("{} is never intervened on", b.source)));
                                    }
                                }
                                dists.extend(b.cases.iter().map(|c| c.distribution));
                                if b.cases.iter().any(|c| !c.action.is_finite()) {
                                    diags.push(Diagnostic::error(&who, "case actions must be finite"));
                                }
                                src.map(|s| (s, b.cases.iter().map(|c| (c.action, c.distribution)).collect()))
                            }
                        };
                        for d in dists {
                            if let Some(p) = d.problem() {
                                diags.push(Diagnostic::error(&who, p));
                            }
                        }
                        out.noise.push(NoiseEffect {
                            feature: j,
                            default: n.distribution,
                            by_action,
                        });
                    }
                }
                EffectSpec::Scm {
                    variables,
                    sigma,
                    equations,
                } => {
                    let who = format!("effect #{ei} (SCM)");
                    if out.scm.is_some() {
                        diags.push(Diagnostic::error(&who, "at most one SCM is supported"));
                        continue;
                    }
                    let k = variables.len();
                    let mut idx = Vec::new();
                    for v in variables {
                        if let Some(j) = resolve(v, &who, &mut diags) {
                            claim(j, who.clone(), &mut diags);
                            idx.push(j);
                        }
                    }
                    if equations.len() != k {
                        diags.push(Diagnostic::error(&who, format!("{} equations for {k} variables", equations.len())));
                    }
                    if sigma.len() != k || sigma.iter().any(|r| r.len() != k) {
                        diags.push(Diagnostic::error(&who, format!("sigma must be {k}x{k}")));
                    } else {
                        for i in 0..k {
                            if (sigma[i][i] - 1.0).abs() > 1e-12 {
                                diags.push(Diagnostic::error(&who, "sigma must have unit diagonal"));
                            }
                            for j in 0..i {
                                if !((sigma[i][j] - sigma[j][i]).abs() <= 1e-12) {
                                    diags.push(Diagnostic::error(&who, "sigma must be symmetric"));
                                }
                            }
                        }
                    }
                    if idx.len() != k || equations.len() != k || !diags.is_empty() {
                        continue;
                    }
                    let mut eqs = Vec::new();
                    for (e, &j) in equations.iter().zip(&idx) {
                        let f = model.feature(j);
                        let se = StructuralEquation {
                            g: e.g,
                            c1: e.c1,
                            c0: e.c0,
                            offset: e.offset,
                            lo: e.lo.unwrap_or(f.lb),
                            hi: e.hi.unwrap_or(f.ub),
                        };
                        if se.lo < f.lb || se.hi > f.ub {
                            diags.push(Diagnostic::error(&who, format!("clip range of {} exceeds its bounds", f.name)));
                        }
                        if let Some(p) = se.domain_problem() {
                            diags.push(Diagnostic::error(&who, format!("{}: {p}", f.name)));
                        }
                        eqs.push(se);
                    }
                    let discrete = idx.iter().map(|&j| model.feature(j).vtype.is_discrete()).collect();
                    match Scm::new(idx, eqs, sigma, discrete) {
                        Some(s) => out.scm = Some(s),
                        None => diags.push(Diagnostic::error(&who, "sigma is not positive definite")),
                    }
                }
            }
        }
        if diags.is_empty() {
            Ok(out)
        } else {
            Err(EffectError::Invalid(diags))
        }
    }

    pub fn scm(&self) -> Option<&Scm> {
        self.scm.as_ref()
    }

    /// Whether every effect (including those of `model`) is a fixed function
    /// of (x, a).
    pub fn is_deterministic(&self, model: &InterventionModel) -> bool {
        self.noise.is_empty()
            && self.scm.is_none()
            && model.linkages().all(|l| l.relation == Relation::Equal)
    }

    /// Feature pairs coupled through effects rather than constraints.
    pub fn coupling_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for n in &self.noise {
            if let Some((src, _)) = n.by_action {
                edges.push((src, n.feature));
            }
        }
        if let Some(s) = &self.scm {
            edges.extend(s.variables.windows(2).map(|w| (w[0], w[1])));
        }
        edges
    }

    /// Draws the effect vector r for origin `x` and feasible action `a`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        model: &InterventionModel,
        x: &[f64],
        a: &[f64],
        rng: &mut R,
    ) -> Vec<f64> {
        let mut r = model.linked_changes(a);
        for l in model.linkages().filter(|l| l.relation != Relation::Equal) {
            for (t, &j) in l.targets.iter().enumerate() {
                let f = model.feature(j);
                let base = x[j] + a[j];
                r[j] = match l.inequality_range(t, a[l.source], base, f) {
                    Some((lo, hi)) if f.vtype.is_discrete() => {
                        rng.random_range(lo as i64..=hi as i64) as f64
                    }
                    Some((lo, hi)) if lo < hi => rng.random_range(lo..hi),
                    Some((lo, _)) => lo,
                    // unreachable for actions that passed the feasibility check
                    None => 0.0,
                };
            }
        }
        for n in &self.noise {
            let j = n.feature;
            let dist = n
                .by_action
                .as_ref()
                .and_then(|(src, cases)| {
                    cases
                        .iter()
                        .find(|(act, _)| (a[*src] - act).abs() <= VALUE_TOL)
                        .map(|(_, d)| *d)
                })
                .unwrap_or(n.default);
            let f = model.feature(j);
            let mut v = dist.draw(rng);
            if f.vtype.is_discrete() {
                v = v.round();
            }
            let base = x[j] + a[j];
            r[j] = (base + v).clamp(f.lb, f.ub) - base;
        }
        if let Some(s) = &self.scm {
            let x0: Vec<f64> = s.variables.iter().map(|&j| x[j] + a[j]).collect();
            let x1 = s.perturb(&x0, rng);
            for ((&j, new), old) in s.variables.iter().zip(x1).zip(x0) {
                r[j] = new - old;
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervention::{FeatureSpec, InterventionModelSpec, ValueType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    fn model_with(specs: &[EffectSpec], features: Vec<FeatureSpec>, downstream: &[&str]) -> InterventionModel {
        InterventionModel::from_spec(&InterventionModelSpec {
            features,
            constraints: deterministic_constraints(specs),
            downstream: downstream.iter().map(|s| s.to_string()).collect(),
        })
        .unwrap()
    }

    #[test]
    fn parse_tagged_specs() {
        let v = json!([
            {"kind": "Deterministic", "links": [{"source": "m", "targets": ["age"], "scale": [0.0833]}]},
            {"kind": "IndependentNoise", "noise": [{"feature": "b", "distribution": {"type": "gaussian", "mean": 0.0, "std_dev": 2.0}}]},
            {"kind": "SCM", "variables": ["b"], "sigma": [[1.0]], "equations": [{"g": "exp", "c1": 0.5, "c0": 3.5, "lo": 15.0, "hi": 200.0}]}
        ]);
        let specs: Vec<EffectSpec> = serde_json::from_value(v).unwrap();
        assert_eq!(specs.len(), 3);
        let bad = json!({"kind": "IndependentNoise", "noise": [], "extra": 1});
        assert!(serde_json::from_value::<EffectSpec>(bad).is_err());
    }

    #[test]
    fn deterministic_age_effect() {
        let specs = vec![EffectSpec::Deterministic {
            links: vec![LinkageParams {
                source: "months".into(),
                targets: vec!["age".into()],
                scale: vec![1.0 / 12.0],
                relation: Relation::Equal,
            }],
        }];
        let m = model_with(
            &specs,
            vec![
                FeatureSpec::new("months", ValueType::Integer, 0.0, 120.0),
                FeatureSpec::new("age", ValueType::Integer, 18.0, 90.0).immutable(),
            ],
            &["age"],
        );
        let eff = EffectModel::compile(&specs, &m).unwrap();
        assert!(eff.is_deterministic(&m));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(eff.sample(&m, &[10.0, 40.0], &[12.0, 0.0], &mut rng), vec![0.0, 1.0]);
    }

    #[test]
    fn gaussian_noise_mean_and_bounds() {
        let specs = vec![EffectSpec::IndependentNoise {
            noise: vec![NoiseSpec {
                feature: "bili".into(),
                distribution: Distribution::Gaussian { mean: 0.0, std_dev: 5.0_f64.sqrt() },
                by_action: None,
            }],
        }];
        let m = model_with(&specs, vec![FeatureSpec::new("bili", ValueType::Real, 0.0, 1000.0)], &["bili"]);
        let eff = EffectModel::compile(&specs, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = (0..n).map(|_| eff.sample(&m, &[100.0], &[0.0], &mut rng)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        for _ in 0..1000 {
            let r = eff.sample(&m, &[0.5], &[0.0], &mut rng)[0];
            assert!(0.5 + r >= 0.0);
        }
    }

    #[test]
    fn action_conditioned_noise() {
        let specs = vec![EffectSpec::IndependentNoise {
            noise: vec![NoiseSpec {
                feature: "distance".into(),
                distribution: Distribution::None,
                by_action: Some(ByAction {
                    source: "remote".into(),
                    cases: vec![ActionCase {
                        action: 1.0,
                        distribution: Distribution::Gaussian { mean: 6000.0, std_dev: 1000.0 },
                    }],
                }),
            }],
        }];
        let m = model_with(
            &specs,
            vec![
                FeatureSpec::binary("remote"),
                FeatureSpec::new("distance", ValueType::Real, 0.0, 1e6),
            ],
            &["distance"],
        );
        let eff = EffectModel::compile(&specs, &m).unwrap();
        assert_eq!(eff.coupling_edges(), vec![(0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(eff.sample(&m, &[0.0, 9000.0], &[0.0, 0.0], &mut rng)[1], 0.0);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| eff.sample(&m, &[0.0, 9000.0], &[1.0, 0.0], &mut rng)[1])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 6000.0).abs() < 30.0, "{mean}");
    }

    #[test]
    fn rejects_bad_payloads() {
        let specs = vec![EffectSpec::Scm {
            variables: vec!["u".into(), "v".into()],
            sigma: vec![vec![1.0, 1.5], vec![1.5, 1.0]],
            equations: vec![
                Equation { g: Transform::Identity, c1: 1.0, c0: 0.0, offset: 0.0, lo: None, hi: None };
                2
            ],
        }];
        let f = vec![
            FeatureSpec::new("u", ValueType::Real, -10.0, 10.0),
            FeatureSpec::new("v", ValueType::Real, -10.0, 10.0),
        ];
        let m = model_with(&specs, f.clone(), &["u", "v"]);
        assert!(EffectModel::compile(&specs, &m).is_err());
        let m = model_with(&specs, f, &["u"]);
        let Err(EffectError::Invalid(d)) = EffectModel::compile(&specs, &m) else { panic!() };
        assert!(d.iter().any(|d| d.message.contains("not declared downstream")));
    }

    #[test]
    fn at_most_linkage_draws_in_range() {
        let specs = vec![EffectSpec::Deterministic {
            links: vec![LinkageParams {
                source: "tweets".into(),
                targets: vec!["urls".into()],
                scale: vec![1.0],
                relation: Relation::AtMost,
            }],
        }];
        let m = model_with(
            &specs,
            vec![
                FeatureSpec::new("tweets", ValueType::Integer, 0.0, 100.0),
                FeatureSpec::new("urls", ValueType::Integer, 0.0, 100.0).immutable(),
            ],
            &["urls"],
        );
        let eff = EffectModel::compile(&specs, &m).unwrap();
        assert!(!eff.is_deterministic(&m));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 4];
        for _ in 0..500 {
            let r = eff.sample(&m, &[1.0, 2.0], &[3.0, 0.0], &mut rng)[1];
            assert!((0.0..=3.0).contains(&r) && r.fract() == 0.0);
            seen[r as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
