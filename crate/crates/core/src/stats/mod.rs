//! Exact binomial inference built on self-contained Beta numerics.

mod beta;
mod binomial;
mod sample_size;

pub use beta::{beta_cdf, beta_quantile, ln_beta, ln_gamma, BetaParams};
pub use binomial::{
    clopper_pearson, one_sided_upper, test_unresponsive, ConfidenceInterval, TestOutcome, Verdict,
};
pub use sample_size::{
    max_interval_width, min_n_estimation, min_n_test, necessary_n, necessary_n_integer,
    test_power,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("sample-size search exceeded n = {limit}")]
    SearchExhausted { limit: u64 },
}

impl StatsError {
    pub(crate) fn invalid(name: &'static str, value: f64) -> Self {
        StatsError::InvalidParameter { name, value }
    }
}

pub(crate) fn check_prob_open(name: &'static str, v: f64) -> Result<(), StatsError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(StatsError::invalid(name, v))
    }
}
