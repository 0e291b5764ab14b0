//! Sample-size calculators for estimation (interval width) and testing
//! (power), plus the necessary-n bound below which the test cannot reject.

use super::beta::{beta_cdf, beta_quantile, BetaParams};
use super::binomial::clopper_pearson;
use super::{check_prob_open, StatsError};

const SEARCH_LIMIT: u64 = 1 << 40;

/// Largest Clopper–Pearson width over all s in 0..=n.
pub fn max_interval_width(n: u64, alpha: f64) -> Result<f64, StatsError> {
    let mut worst = 0.0_f64;
    for s in 0..=n {
        worst = worst.max(clopper_pearson(n, s, alpha)?.width());
    }
    Ok(worst)
}

/// Smallest n whose worst-case interval width is at most `width`.
pub fn min_n_estimation(alpha: f64, width: f64) -> Result<u64, StatsError> {
    check_prob_open("alpha", alpha)?;
    check_prob_open("width", width)?;
    smallest_satisfying(|n| Ok(max_interval_width(n, alpha)? <= width))
}

/// The power expression F(B_alpha(n eps, n - n eps); n(eps - delta), n - n(eps - delta))
/// with real-valued shape parameters.
pub fn test_power(n: u64, alpha: f64, epsilon: f64, delta: f64) -> Result<f64, StatsError> {
    check_test_params(alpha, epsilon, delta)?;
    if n == 0 {
        return Err(StatsError::invalid("n", 0.0));
    }
    let nf = n as f64;
    let critical = beta_quantile(alpha, BetaParams::new(nf * epsilon, nf - nf * epsilon)?);
    let shifted = epsilon - delta;
    Ok(beta_cdf(critical, BetaParams::new(nf * shifted, nf - nf * shifted)?))
}

/// Smallest n at which [`test_power`] reaches `1 - beta`.
pub fn min_n_test(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<u64, StatsError> {
    check_test_params(alpha, epsilon, delta)?;
    check_prob_open("beta", beta)?;
    smallest_satisfying(|n| Ok(test_power(n, alpha, epsilon, delta)? >= 1.0 - beta))
}

/// ln(alpha) / ln(1 - epsilon). Rejection requires n strictly above this.
pub fn necessary_n(alpha: f64, epsilon: f64) -> Result<f64, StatsError> {
    check_prob_open("alpha", alpha)?;
    check_prob_open("epsilon", epsilon)?;
    Ok(alpha.ln() / (-epsilon).ln_1p())
}

/// Smallest integer n with n > [`necessary_n`].
pub fn necessary_n_integer(alpha: f64, epsilon: f64) -> Result<u64, StatsError> {
    Ok(necessary_n(alpha, epsilon)?.floor() as u64 + 1)
}

fn check_test_params(alpha: f64, epsilon: f64, delta: f64) -> Result<(), StatsError> {
    check_prob_open("alpha", alpha)?;
    check_prob_open("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < epsilon) {
        return Err(StatsError::invalid("delta", delta));
    }
    Ok(())
}

/// Exponential doubling to bracket, binary search inside the bracket, then a
/// linear re-check of the two preceding n since neither criterion is proven
/// monotone in n.
fn smallest_satisfying<F>(mut pred: F) -> Result<u64, StatsError>
where
    F: FnMut(u64) -> Result<bool, StatsError>,
{
    let mut hi = 1u64;
    while !pred(hi)? {
        hi *= 2;
        if hi > SEARCH_LIMIT {
            return Err(StatsError::SearchExhausted { limit: SEARCH_LIMIT });
        }
    }
    let mut lo = hi / 2; // pred(lo) is false, or lo == 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut best = hi;
    for n in hi.saturating_sub(2).max(1)..hi {
        if pred(n)? {
            best = n;
            break;
        }
    }
    Ok(best)
}
