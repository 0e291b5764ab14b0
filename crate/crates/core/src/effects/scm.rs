//! Structural causal model with correlated exogenous noise. Each variable
//! follows x = clip(g(c1 u + c0), lo, hi) of its own exogenous term u.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Exp,
    ExpPlusOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Equation {
    pub g: Transform,
    pub c1: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub offset: f64,
    /// Clip range; missing ends default to the feature bounds.
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

/// Equation with a resolved clip range.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEquation {
    pub g: Transform,
    pub c1: f64,
    pub c0: f64,
    pub offset: f64,
    pub lo: f64,
    pub hi: f64,
}

impl StructuralEquation {
    fn link(&self, v: f64) -> f64 {
        match self.g {
            Transform::Identity => v,
            Transform::Exp => v.exp(),
            Transform::ExpPlusOffset => v.exp() + self.offset,
        }
    }

    fn link_inv(&self, x: f64) -> f64 {
        match self.g {
            Transform::Identity => x,
            Transform::Exp => x.ln(),
            Transform::ExpPlusOffset => (x - self.offset).ln(),
        }
    }

    pub fn apply(&self, u: f64) -> f64 {
        self.link(self.c1 * u + self.c0).clamp(self.lo, self.hi)
    }

    /// Exogenous value reproducing `x`. Saturated values map to the
    /// preimage of the clip boundary.
    pub fn abduct(&self, x: f64) -> f64 {
        (self.link_inv(x.clamp(self.lo, self.hi)) - self.c0) / self.c1
    }

    /// The image of g over the clip range must be reachable, so that
    /// abduction is defined on every admissible value.
    pub(crate) fn domain_problem(&self) -> Option<String> {
        if !(self.c1.is_finite() && self.c1 != 0.0 && self.c0.is_finite() && self.offset.is_finite()) {
            return Some("c1 must be finite and nonzero, c0 and offset finite".into());
        }
        if !(self.lo <= self.hi) {
            return Some(format!("clip range [{}, {}] is empty", self.lo, self.hi));
        }
        let floor = match self.g {
            Transform::Identity => return None,
            Transform::Exp => 0.0,
            Transform::ExpPlusOffset => self.offset,
        };
        (self.lo <= floor).then(|| format!("clip lower end {} must exceed {floor}", self.lo))
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(sigma: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = sigma.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = sigma[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (sigma[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// One abduction-perturbation round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmDraw {
    pub x1: Vec<f64>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    pub(crate) variables: Vec<usize>,
    pub(crate) equations: Vec<StructuralEquation>,
    pub(crate) chol: Vec<Vec<f64>>,
    pub(crate) discrete: Vec<bool>,
}

impl Scm {
    /// Builds the model; `None` if Σ has no Cholesky factor.
    pub fn new(
        variables: Vec<usize>,
        equations: Vec<StructuralEquation>,
        sigma: &[Vec<f64>],
        discrete: Vec<bool>,
    ) -> Option<Self> {
        Some(Self {
            chol: cholesky(sigma)?,
            variables,
            equations,
            discrete,
        })
    }

    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn cholesky_factor(&self) -> &[Vec<f64>] {
        &self.chol
    }

    /// Counterfactual perturbation of the SCM sub-vector `x0`.
    pub fn perturb<R: Rng + ?Sized>(&self, x0: &[f64], rng: &mut R) -> Vec<f64> {
        self.perturb_traced(x0, rng).x1
    }

    pub fn perturb_traced<R: Rng + ?Sized>(&self, x0: &[f64], rng: &mut R) -> ScmDraw {
        let z: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.perturb_with(x0, &z)
    }

    /// Round trip with a fixed standard-normal vector `z`.
    pub fn perturb_with(&self, x0: &[f64], z: &[f64]) -> ScmDraw {
        let u0: Vec<f64> = self.equations.iter().zip(x0).map(|(e, &x)| e.abduct(x)).collect();
        let u1: Vec<f64> = u0
            .iter()
            .enumerate()
            .map(|(i, u)| u + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect();
        let x1 = self
            .equations
            .iter()
            .zip(&u1)
            .zip(&self.discrete)
            .map(|((e, &u), &disc)| {
                let v = e.apply(u);
                if disc {
                    v.round().clamp(e.lo.ceil(), e.hi.floor())
                } else {
                    v
                }
            })
            .collect();
        ScmDraw { x1, u0, u1 }
    }
}
