//! Exact (Clopper–Pearson) inference on a binomial proportion and the
//! one-sided unresponsiveness test built on its upper bound.

use serde::{Deserialize, Serialize};

use super::beta::{beta_quantile, BetaParams};
use super::{check_prob_open, StatsError};

/// Two-sided exact confidence interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub n: u64,
    pub successes: u64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

fn check_counts(n: u64, s: u64) -> Result<(), StatsError> {
    if n == 0 {
        return Err(StatsError::invalid("n", 0.0));
    }
    if s > n {
        return Err(StatsError::invalid("successes", s as f64));
    }
    Ok(())
}

/// Lower bound B_q(s, n - s + 1); zero when `s = 0`.
fn lower_bound(n: u64, s: u64, q: f64) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let p = BetaParams::new(s as f64, (n - s + 1) as f64).expect("positive shape");
    beta_quantile(q, p)
}

/// Upper bound B_q(s + 1, n - s); one when `s = n`.
fn upper_bound(n: u64, s: u64, q: f64) -> f64 {
    if s == n {
        return 1.0;
    }
    let p = BetaParams::new((s + 1) as f64, (n - s) as f64).expect("positive shape");
    beta_quantile(q, p)
}

/// Clopper–Pearson interval with coverage at least `1 - alpha`.
pub fn clopper_pearson(n: u64, s: u64, alpha: f64) -> Result<ConfidenceInterval, StatsError> {
    check_counts(n, s)?;
    check_prob_open("alpha", alpha)?;
    Ok(ConfidenceInterval {
        lo: lower_bound(n, s, alpha / 2.0),
        hi: upper_bound(n, s, 1.0 - alpha / 2.0),
        alpha,
        n,
        successes: s,
    })
}

/// One-sided `1 - alpha` upper confidence bound on the proportion. This is
/// the upper end of the two-sided interval at level `2 alpha`.
pub fn one_sided_upper(n: u64, s: u64, alpha: f64) -> Result<f64, StatsError> {
    check_counts(n, s)?;
    check_prob_open("alpha", alpha)?;
    Ok(upper_bound(n, s, 1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Unresponsive,
    NotRejected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unresponsive => "unresponsive",
            Verdict::NotRejected => "not-rejected",
        }
    }
}

/// Outcome of testing H0: rho >= epsilon against H1: rho < epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub epsilon: f64,
    pub alpha: f64,
    pub n: u64,
    pub successes: u64,
    pub rho_hat: f64,
    pub upper_bound: f64,
    pub reject_h0: bool,
    pub verdict: Verdict,
}

/// Claims unresponsiveness (rejects H0) iff the one-sided upper bound is
/// strictly below `epsilon`. The false-claim probability is at most `alpha`.
pub fn test_unresponsive(
    n: u64,
    s: u64,
    epsilon: f64,
    alpha: f64,
) -> Result<TestOutcome, StatsError> {
    check_prob_open("epsilon", epsilon)?;
    let upper = one_sided_upper(n, s, alpha)?;
    let reject = upper < epsilon;
    Ok(TestOutcome {
        epsilon,
        alpha,
        n,
        successes: s,
        rho_hat: s as f64 / n as f64,
        upper_bound: upper,
        reject_h0: reject,
        verdict: if reject {
            Verdict::Unresponsive
        } else {
            Verdict::NotRejected
        },
    })
}
