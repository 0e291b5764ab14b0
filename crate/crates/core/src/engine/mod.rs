//! Per-point estimation and testing, population audits and the convergence
//! study.

mod convergence;
mod data;
mod report;

pub use convergence::{convergence_study, ConvergenceOptions, ConvergenceRow, ConvergenceStudy, Excluded};
pub use data::{read_instances, Instance, PointWriter};
pub use report::{
    Aggregates, AuditReport, EngineInfo, PointFailure, PointRecord, Proportion, CSV_HEADER,
    MULTIPLE_TESTING_NOTE,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{AuditPlan, Config, ConfigError, Mode};
use crate::model_io::{ModelHandle, Prediction, PredictError, PredictionTarget, TargetError};
use crate::sampler::{SampleError, Sampler};
use crate::stats::{self, StatsError};

/// Largest tolerated share of failed points before an audit aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum PointError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{failed} of {total} points failed, above the {}% limit; first failure: {first}", MAX_FAILURE_FRACTION * 100.0)]
    Integrity {
        failed: usize,
        total: usize,
        first: String,
    },
}

/// Number of `points` whose prediction falls in the target.
pub fn count_in_target(
    handle: &mut ModelHandle,
    target: &PredictionTarget,
    baseline: &Prediction,
    points: &[Vec<f64>],
) -> Result<u64, PointError> {
    let preds = handle.predict_batch(points)?;
    let mut s = 0;
    for p in &preds {
        if target.contains(p, baseline)? {
            s += 1;
        }
    }
    Ok(s)
}

/// Runs audits for one configuration.
pub struct Engine<'a> {
    cfg: &'a Config,
    plan: AuditPlan,
    sampler: Sampler<'a>,
    target: &'a PredictionTarget,
    seed: u64,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a Config, mode: Mode) -> Result<Self, ConfigError> {
        let plan = cfg.plan(mode)?;
        cfg.model_spec()?;
        Ok(Self {
            cfg,
            plan,
            sampler: Sampler::new(&cfg.model, &cfg.effects).with_budget(cfg.file.audit.budget),
            target: cfg.target()?,
            seed: cfg.file.audit.seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn plan(&self) -> &AuditPlan {
        &self.plan
    }

    pub fn open_model(&self) -> Result<ModelHandle, PredictError> {
        self.cfg
            .model_spec()
            .expect("checked in Engine::new")
            .open(self.cfg.model.dim())
    }

    /// Baseline prediction, or `None` when the population filter excludes it.
    pub fn baseline(&self, handle: &mut ModelHandle, x: &[f64]) -> Result<Option<Prediction>, PointError> {
        let b = handle.predict(x)?;
        match &self.cfg.file.audit.filter {
            Some(f) if !f.contains(&b, &b)? => Ok(None),
            _ => Ok(Some(b)),
        }
    }

    /// Samples n reachable points from the instance's own stream, counts
    /// target hits and attaches the interval (and the test, when an epsilon
    /// is configured). Estimation and testing share the same batch.
    pub fn evaluate_point(
        &self,
        handle: &mut ModelHandle,
        id: &str,
        x: &[f64],
        baseline: Prediction,
    ) -> Result<PointRecord, PointError> {
        let n = self.plan.n;
        let batch = self
            .sampler
            .sample_reachable(x, n as usize, self.seed, id, 1)?;
        let xs: Vec<Vec<f64>> = batch.points.into_iter().map(|p| p.x_prime).collect();
        let s = count_in_target(handle, self.target, &baseline, &xs)?;
        let ci = stats::clopper_pearson(n, s, self.plan.alpha)?;
        let test = match self.plan.epsilon {
            Some(eps) => Some(stats::test_unresponsive(n, s, eps, self.plan.alpha)?),
            None => None,
        };
        let warnings = self
            .cfg
            .model
            .check_point(x)
            .into_iter()
            .map(|d| d.to_string())
            .collect();
        Ok(PointRecord {
            instance_id: id.to_string(),
            baseline,
            n,
            successes: s,
            rho_hat: s as f64 / n as f64,
            ci,
            test,
            rejection_stats: batch.rejection_stats,
            warnings,
        })
    }

    /// Estimate for one point regardless of the population filter.
    pub fn estimate_point(&self, handle: &mut ModelHandle, id: &str, x: &[f64]) -> Result<PointRecord, PointError> {
        let b = handle.predict(x)?;
        self.evaluate_point(handle, id, x, b)
    }

    pub fn audit_population(&self, instances: &[Instance], workers: usize) -> Result<AuditReport, AuditError> {
        enum Outcome {
            Record(PointRecord),
            Filtered,
            Failed(PointFailure),
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        let outcomes: Vec<Outcome> = pool.install(|| {
            instances
                .par_iter()
                .map_init(
                    || self.open_model(),
                    |handle, inst| {
                        let run = |handle: &mut Result<ModelHandle, PredictError>| -> Result<Option<PointRecord>, PointError> {
                            let h = handle.as_mut().map_err(|e| e.clone())?;
                            match self.baseline(h, &inst.x)? {
                                None => Ok(None),
                                Some(b) => self.evaluate_point(h, &inst.id, &inst.x, b).map(Some),
                            }
                        };
                        match run(handle) {
                            Ok(Some(r)) => Outcome::Record(r),
                            Ok(None) => Outcome::Filtered,
                            Err(e) => {
                                // a broken child process stays broken; start afresh
                                if matches!(e, PointError::Predict(PredictError::Transport { .. })) {
                                    *handle = self.open_model();
                                }
                                Outcome::Failed(PointFailure {
                                    instance_id: inst.id.clone(),
                                    error: e.to_string(),
                                })
                            }
                        }
                    },
                )
                .collect()
        });

        let mut records = Vec::new();
        let mut failures = Vec::new();
        let mut filtered_out = 0;
        for o in outcomes {
            match o {
                Outcome::Record(r) => records.push(r),
                Outcome::Filtered => filtered_out += 1,
                Outcome::Failed(f) => failures.push(f),
            }
        }
        let total = instances.len();
        if !failures.is_empty() && failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
            return Err(AuditError::Integrity {
                failed: failures.len(),
                total,
                first: format!("{}: {}", failures[0].instance_id, failures[0].error),
            });
        }
        let aggregates = Aggregates::from_records(&records, &self.plan);
        Ok(AuditReport {
            engine: EngineInfo::default(),
            config_hash: self.cfg.hash.clone(),
            seed: self.seed,
            plan: self.plan,
            population: total,
            filtered_out,
            records,
            failures,
            aggregates,
            note: MULTIPLE_TESTING_NOTE,
        })
    }
}
