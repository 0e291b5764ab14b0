use std::io::Write;

use serde::Serialize;

use crate::config::AuditPlan;
use crate::model_io::Prediction;
use crate::sampler::BlockStats;
use crate::stats::{clopper_pearson, ConfidenceInterval, TestOutcome, Verdict};

pub const MULTIPLE_TESTING_NOTE: &str =
    "each test controls its own false-claim rate at alpha; no family-wise correction is applied";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub instance_id: String,
    pub baseline: Prediction,
    pub n: u64,
    pub successes: u64,
    pub rho_hat: f64,
    pub ci: ConfidenceInterval,
    pub test: Option<TestOutcome>,
    pub rejection_stats: Vec<BlockStats>,
    pub warnings: Vec<String>,
}

impl PointRecord {
    pub fn verdict(&self) -> Option<Verdict> {
        self.test.map(|t| t.verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub instance_id: String,
    pub error: String,
}

/// A count with its exact two-sided interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub count: u64,
    pub total: u64,
    pub fraction: f64,
    pub ci: ConfidenceInterval,
}

impl Proportion {
    fn new(count: u64, total: u64, alpha: f64) -> Option<Self> {
        (total > 0).then(|| Self {
            count,
            total,
            fraction: count as f64 / total as f64,
            ci: clopper_pearson(total, count, alpha).expect("count within total, alpha validated"),
        })
    }
}

/// Population summaries; every field is `null` for an empty population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub records: usize,
    pub mean_rho_hat: Option<f64>,
    pub below_epsilon: Option<Proportion>,
    pub rejected: Option<Proportion>,
    pub tests_run: usize,
}

impl Aggregates {
    pub fn from_records(records: &[PointRecord], plan: &AuditPlan) -> Self {
        let total = records.len() as u64;
        let mean = (!records.is_empty())
            .then(|| records.iter().map(|r| r.rho_hat).sum::<f64>() / records.len() as f64);
        let below = plan.epsilon.and_then(|eps| {
            let c = records.iter().filter(|r| r.rho_hat < eps).count() as u64;
            Proportion::new(c, total, plan.alpha)
        });
        let tested: Vec<_> = records.iter().filter_map(|r| r.test).collect();
        let rejected = Proportion::new(
            tested.iter().filter(|t| t.reject_h0).count() as u64,
            tested.len() as u64,
            plan.alpha,
        );
        Self {
            records: records.len(),
            mean_rho_hat: mean,
            below_epsilon: below,
            rejected,
            tests_run: tested.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for EngineInfo {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub engine: EngineInfo,
    pub config_hash: String,
    pub seed: u64,
    pub plan: AuditPlan,
    pub population: usize,
    pub filtered_out: usize,
    pub records: Vec<PointRecord>,
    pub failures: Vec<PointFailure>,
    pub aggregates: Aggregates,
    pub note: &'static str,
}

pub const CSV_HEADER: [&str; 11] = [
    "instance_id",
    "baseline",
    "n",
    "successes",
    "rho_hat",
    "ci_lo",
    "ci_hi",
    "upper_bound",
    "verdict",
    "proposals",
    "warnings",
];

impl AuditReport {
    /// One row per record, in report order.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.records {
            let proposals: u64 = r.rejection_stats.iter().map(|s| s.proposals).sum();
            out.write_record([
                r.instance_id.clone(),
                r.baseline.to_string(),
                r.n.to_string(),
                r.successes.to_string(),
                r.rho_hat.to_string(),
                r.ci.lo.to_string(),
                r.ci.hi.to_string(),
                r.test.map(|t| t.upper_bound.to_string()).unwrap_or_default(),
                r.verdict().map(|v| v.as_str().to_string()).unwrap_or_default(),
                proposals.to_string(),
                r.warnings.join("; "),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
