//! Uniform sampling of reachable points by per-block rejection sampling, and
//! exhaustive enumeration for small discrete instances.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::effects::EffectModel;
use crate::intervention::{InterventionModel, ModelError, Partition};

/// Consecutive rejections tolerated in one block before giving up.
pub const DEFAULT_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("block {{{}}} rejected {budget} consecutive proposals; the intervention set looks empty", .block.join(", "))]
    Infeasible { block: Vec<String>, budget: u64 },
    #[error("cannot enumerate: feature {0} is real-valued and actionable")]
    RealFeature(String),
    #[error("cannot enumerate with random effects")]
    RandomEffects,
    #[error("reachable set exceeds cap {cap} (enumerated {partial} before stopping)")]
    Overflow { cap: usize, partial: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachablePoint {
    pub x_prime: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
}

/// Proposal counts for one partition block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockStats {
    pub block: Vec<usize>,
    pub proposals: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub origin: Vec<f64>,
    pub points: Vec<ReachablePoint>,
    pub seed: u64,
    pub rejection_stats: Vec<BlockStats>,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// 32-byte stream seed derived from the root seed and any number of labels
/// (instance id, sample size, trial, ...).
pub fn derive_seed(root: u64, labels: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l);
    }
    h.finalize().into()
}

pub fn stream_rng(root: u64, labels: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(root, labels))
}

/// Uniform draw of a_j over [LB_j(x), UB_j(x)]: the integer lattice for
/// discrete features, the half-open interval for real ones.
pub fn sample_intervention<R: Rng + ?Sized>(
    model: &InterventionModel,
    x: &[f64],
    j: usize,
    rng: &mut R,
) -> Result<f64, ModelError> {
    let (lo, hi) = model.action_bounds(x, j)?;
    Ok(if lo == hi {
        lo
    } else if model.feature(j).vtype.is_discrete() {
        rng.random_range(lo.ceil() as i64..=hi.floor() as i64) as f64
    } else {
        rng.random_range(lo..hi)
    })
}

#[derive(Debug, Clone)]
struct BlockPlan {
    members: Vec<usize>,
    intervened: Vec<usize>,
    constraints: Vec<usize>,
}

/// Sampler bound to one intervention model and effect model.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    model: &'a InterventionModel,
    effects: &'a EffectModel,
    partition: Partition,
    plans: Vec<BlockPlan>,
    budget: u64,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a InterventionModel, effects: &'a EffectModel) -> Self {
        let partition = model.partition_with(effects.coupling_edges());
        let plans = partition
            .blocks()
            .iter()
            .map(|b| BlockPlan {
                members: b.clone(),
                intervened: b.iter().copied().filter(|&j| model.is_intervened(j)).collect(),
                constraints: model
                    .constraints()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.members().iter().all(|m| b.contains(m)))
                    .map(|(i, _)| i)
                    .collect(),
            })
            .collect();
        Self {
            model,
            effects,
            partition,
            plans,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget.max(1);
        self
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    fn block_feasible(&self, plan: &BlockPlan, x: &[f64], a: &[f64]) -> bool {
        if plan.constraints.is_empty() {
            return true;
        }
        let post = self.model.post_intervention(x, a);
        let cs = self.model.constraints();
        plan.constraints
            .iter()
            .all(|&ci| cs[ci].holds(x, &post, self.model.features()))
    }

    fn stats_template(&self) -> Vec<BlockStats> {
        self.plans
            .iter()
            .map(|p| BlockStats {
                block: p.members.clone(),
                proposals: 0,
                accepted: 0,
            })
            .collect()
    }

    /// One feasible action, accumulating proposal counts into `stats`.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        stats: &mut [BlockStats],
    ) -> Result<Vec<f64>, SampleError> {
        let mut a = vec![0.0; self.model.dim()];
        for (plan, st) in self.plans.iter().zip(stats.iter_mut()) {
            if plan.intervened.is_empty() {
                continue;
            }
            let mut tries = 0u64;
            loop {
                for &j in &plan.intervened {
                    a[j] = sample_intervention(self.model, x, j, rng)?;
                }
                st.proposals += 1;
                if self.block_feasible(plan, x, &a) {
                    st.accepted += 1;
                    break;
                }
                tries += 1;
                if tries >= self.budget {
                    return Err(SampleError::Infeasible {
                        block: plan
                            .members
                            .iter()
                            .map(|&j| self.model.feature(j).name.clone())
                            .collect(),
                        budget: self.budget,
                    });
                }
            }
        }
        Ok(a)
    }

    pub fn sample_point<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        stats: &mut [BlockStats],
    ) -> Result<ReachablePoint, SampleError> {
        let a = self.sample_action(x, rng, stats)?;
        let r = self.effects.sample(self.model, x, &a, rng);
        let x_prime = x.iter().zip(&a).zip(&r).map(|((x, a), r)| x + a + r).collect();
        Ok(ReachablePoint { x_prime, a, r })
    }

    /// `n` points from a single stream.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<ReachablePoint>, Vec<BlockStats>), SampleError> {
        self.model.check_origin(x)?;
        let mut stats = self.stats_template();
        let points = (0..n)
            .map(|_| self.sample_point(x, rng, &mut stats))
            .collect::<Result<_, _>>()?;
        Ok((points, stats))
    }

    /// `n` points split across `workers` independent streams of the seed
    /// derived from (`seed`, `instance`). Points are ordered by worker, then
    /// draw. One worker gives the plain single-stream batch.
    pub fn sample_reachable(
        &self,
        x: &[f64],
        n: usize,
        seed: u64,
        instance: &str,
        workers: usize,
    ) -> Result<SampleBatch, SampleError> {
        self.model.check_origin(x)?;
        let key = derive_seed(seed, &[instance.as_bytes()]);
        let workers = workers.clamp(1, n.max(1));
        let shards: Vec<_> = (0..workers)
            .into_par_iter()
            .map(|w| {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(w as u64);
                let count = n / workers + usize::from(w < n % workers);
                self.sample_with(x, count, &mut rng)
            })
            .collect::<Result<_, _>>()?;
        let mut stats = self.stats_template();
        let mut points = Vec::with_capacity(n);
        for (p, s) in shards {
            points.extend(p);
            for (acc, s) in stats.iter_mut().zip(s) {
                acc.proposals += s.proposals;
                acc.accepted += s.accepted;
            }
        }
        Ok(SampleBatch {
            origin: x.to_vec(),
            points,
            seed,
            rejection_stats: stats,
        })
    }

    /// Every reachable point, deduplicated on x'. Requires discrete
    /// intervened features and deterministic effects.
    pub fn enumerate_reachable(&self, x: &[f64], cap: usize) -> Result<Vec<ReachablePoint>, SampleError> {
        self.model.check_origin(x)?;
        if !self.effects.is_deterministic(self.model) {
            return Err(SampleError::RandomEffects);
        }
        for j in 0..self.model.dim() {
            if self.model.is_intervened(j) && !self.model.feature(j).vtype.is_discrete() {
                let (lo, hi) = self.model.action_bounds(x, j)?;
                if lo != hi {
                    return Err(SampleError::RealFeature(self.model.feature(j).name.clone()));
                }
            }
        }

        // feasible partial actions per block, each as (feature, value) pairs
        let mut per_block: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
        for plan in &self.plans {
            let mut ranges = Vec::new();
            for &j in &plan.intervened {
                let (lo, hi) = self.model.action_bounds(x, j)?;
                ranges.push((lo.ceil() as i64, hi.floor() as i64));
            }
            let mut found = Vec::new();
            let mut a = vec![0.0; self.model.dim()];
            let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'odometer: loop {
                for (k, &j) in plan.intervened.iter().enumerate() {
                    a[j] = cur[k] as f64;
                }
                if self.block_feasible(plan, x, &a) {
                    if found.len() >= cap {
                        return Err(SampleError::Overflow { cap, partial: found.len() });
                    }
                    found.push(plan.intervened.iter().map(|&j| (j, a[j])).collect());
                }
                for k in (0..cur.len()).rev() {
                    if cur[k] < ranges[k].1 {
                        cur[k] += 1;
                        continue 'odometer;
                    }
                    cur[k] = ranges[k].0;
                }
                break;
            }
            per_block.push(found);
        }

        let total = per_block
            .iter()
            .try_fold(1usize, |acc, b| acc.checked_mul(b.len()).filter(|&t| t <= cap));
        if total.is_none() {
            let partial = per_block
                .iter()
                .map(|b| b.len())
                .try_fold(1usize, |acc, l| acc.checked_mul(l))
                .unwrap_or(usize::MAX)
                .min(cap);
            return Err(SampleError::Overflow { cap, partial });
        }

        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut idx = vec![0usize; per_block.len()];
        'product: loop {
            let mut a = vec![0.0; self.model.dim()];
            for (b, &i) in per_block.iter().zip(&idx) {
                for &(j, v) in &b[i] {
                    a[j] = v;
                }
            }
            let r = self.model.linked_changes(&a);
            let x_prime: Vec<f64> = x.iter().zip(&a).zip(&r).map(|((x, a), r)| x + a + r).collect();
            let key: Vec<u64> = x_prime.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                out.push(ReachablePoint { x_prime, a, r });
            }
            for k in (0..idx.len()).rev() {
                if idx[k] + 1 < per_block[k].len() {
                    idx[k] += 1;
                    continue 'product;
                }
                idx[k] = 0;
            }
            break;
        }
        Ok(out)
    }
}
