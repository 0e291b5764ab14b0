use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{count_in_target, Instance, PointError};
use crate::config::{Config, ConfigError};
use crate::model_io::{ModelHandle, PredictError};
use crate::sampler::{stream_rng, Sampler};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub n_grid: Vec<u64>,
    pub trials: u32,
    pub alpha: f64,
    pub epsilon: f64,
    /// Effect size for the power column.
    pub delta: f64,
    pub seed: u64,
    /// Largest reachable set enumerated per instance.
    pub cap: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub mean_abs_error: f64,
    /// P(no claim | rho >= epsilon); `None` without responsive instances.
    pub specificity: Option<f64>,
    /// P(claim | rho < epsilon); `None` without unresponsive instances.
    pub recall: Option<f64>,
    /// P(rho < epsilon | claim), 0 when nothing is claimed.
    pub precision: f64,
    pub power: f64,
    pub responsive: usize,
    pub unresponsive: usize,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excluded {
    pub instance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Enumerated responsiveness per included instance.
    pub truth: Vec<(String, f64)>,
    pub excluded: Vec<Excluded>,
}

impl ConvergenceStudy {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "n",
            "mean_abs_error",
            "specificity",
            "recall",
            "precision",
            "power",
            "responsive",
            "unresponsive",
            "trials",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.mean_abs_error.to_string(),
                opt(r.specificity),
                opt(r.recall),
                r.precision.to_string(),
                r.power.to_string(),
                r.responsive.to_string(),
                r.unresponsive.to_string(),
                r.trials.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-instance tallies for one n.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    abs_error: f64,
    rejections: u32,
}

/// Compares sampled estimates and tests against enumerated ground truth,
/// repeating each n `trials` times per instance.
pub fn convergence_study(
    cfg: &Config,
    instances: &[Instance],
    opts: &ConvergenceOptions,
) -> Result<ConvergenceStudy, ConfigError> {
    let model_spec = cfg.model_spec()?;
    let target = cfg.target()?;
    for &n in &opts.n_grid {
        if n == 0 {
            return Err(ConfigError::Invalid("n grid entries must be positive".into()));
        }
    }
    let sampler = Sampler::new(&cfg.model, &cfg.effects).with_budget(cfg.file.audit.budget);
    let open = || model_spec.open(cfg.model.dim());

    let one = |handle: &mut Result<ModelHandle, PredictError>,
               inst: &Instance|
     -> Result<Option<(f64, Vec<Tally>)>, PointError> {
        let h = handle.as_mut().map_err(|e| e.clone())?;
        let baseline = h.predict(&inst.x)?;
        if let Some(f) = &cfg.file.audit.filter {
            if !f.contains(&baseline, &baseline)? {
                return Ok(None);
            }
        }
        let reach = sampler.enumerate_reachable(&inst.x, opts.cap)?;
        let xs: Vec<Vec<f64>> = reach.into_iter().map(|p| p.x_prime).collect();
        let rho = count_in_target(h, target, &baseline, &xs)? as f64 / xs.len() as f64;
        let mut tallies = Vec::with_capacity(opts.n_grid.len());
        for &n in &opts.n_grid {
            let mut t = Tally::default();
            for trial in 0..opts.trials {
                let mut rng = stream_rng(
                    opts.seed,
                    &[inst.id.as_bytes(), &n.to_le_bytes(), &trial.to_le_bytes()],
                );
                let (points, _) = sampler.sample_with(&inst.x, n as usize, &mut rng)?;
                let xs: Vec<Vec<f64>> = points.into_iter().map(|p| p.x_prime).collect();
                let s = count_in_target(h, target, &baseline, &xs)?;
                t.abs_error += (s as f64 / n as f64 - rho).abs();
                if stats::test_unresponsive(n, s, opts.epsilon, opts.alpha)?.reject_h0 {
                    t.rejections += 1;
                }
            }
            tallies.push(t);
        }
        Ok(Some((rho, tallies)))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        instances
            .par_iter()
            .map_init(open, |h, inst| one(h, inst))
            .collect()
    });

    let mut truth = Vec::new();
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for (inst, r) in instances.iter().zip(results) {
        match r {
            Ok(None) => excluded.push(Excluded {
                instance_id: inst.id.clone(),
                reason: "filtered out".into(),
            }),
            Ok(Some((rho, tallies))) => {
                truth.push((inst.id.clone(), rho));
                kept.push((rho, tallies));
            }
            Err(e) => excluded.push(Excluded {
                instance_id: inst.id.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let responsive = kept.iter().filter(|(rho, _)| *rho >= opts.epsilon).count();
    let unresponsive = kept.len() - responsive;
    let trials = opts.trials as f64;
    let mut rows = Vec::new();
    for (k, &n) in opts.n_grid.iter().enumerate() {
        let mut err = 0.0;
        let (mut claims_resp, mut claims_unresp) = (0u64, 0u64);
        for (rho, tallies) in &kept {
            err += tallies[k].abs_error;
            if *rho >= opts.epsilon {
                claims_resp += u64::from(tallies[k].rejections);
            } else {
                claims_unresp += u64::from(tallies[k].rejections);
            }
        }
        let claims = claims_resp + claims_unresp;
        let rate = |count: u64, pop: usize| (pop > 0).then(|| count as f64 / (pop as f64 * trials));
        rows.push(ConvergenceRow {
            n,
            mean_abs_error: if kept.is_empty() { f64::NAN } else { err / (kept.len() as f64 * trials) },
            specificity: rate(claims_resp, responsive).map(|r| 1.0 - r),
            recall: rate(claims_unresp, unresponsive),
            precision: if claims == 0 { 0.0 } else { claims_unresp as f64 / claims as f64 },
            power: stats::test_power(n, opts.alpha, opts.epsilon, opts.delta)?,
            responsive,
            unresponsive,
            trials: opts.trials,
        });
    }
    Ok(ConvergenceStudy {
        rows,
        truth,
        excluded,
    })
}
