//! Beta-distribution numerics: log-gamma, the regularized incomplete beta
//! function I_x(a, b) and its inverse.
//!
//! Shape parameters are real-valued. A zero shape parameter is accepted as the
//! limit of the family: `a = 0` is a point mass at 0 and `b = 0` a point mass
//! at 1. Exact binomial intervals hit both limits at their boundaries.

use super::StatsError;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Stirling-series remainder ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)], x ≥ 10.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    (1.0 / 12.0
        + r * (-1.0 / 360.0 + r * (1.0 / 1260.0 + r * (-1.0 / 1680.0 + r * (1.0 / 1188.0)))))
        / x
}

/// ln B(a, b), arranged to avoid cancellation between large log-gamma terms.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let ln_sqrt_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        -0.5 * q.ln() + ln_sqrt_2pi + corr
            + (p - 0.5) * (p / (p + q)).ln()
            + q * (-p / (p + q)).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-p / (p + q)).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Shape parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    /// Both parameters must be finite and non-negative, and not both zero.
    pub fn new(a: f64, b: f64) -> Result<Self, StatsError> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(StatsError::invalid("a", a));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(StatsError::invalid("b", b));
        }
        if a == 0.0 && b == 0.0 {
            return Err(StatsError::invalid("a + b", 0.0));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Density at `x`; zero outside (0, 1) and for the degenerate limits.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.a == 0.0 || self.b == 0.0 || x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - ln_beta(self.a, self.b)).exp()
    }
}

/// Regularized incomplete beta I_x(a, b), the Beta CDF at `x`.
///
/// `x` outside [0, 1] is clamped.
pub fn beta_cdf(x: f64, p: BetaParams) -> f64 {
    let (a, b) = (p.a, p.b);
    if a == 0.0 {
        return 1.0;
    }
    if b == 0.0 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - incbeta_cf(b, a, 1.0 - x)
    } else {
        incbeta_cf(a, b, x)
    }
}

/// Continued fraction for I_x(a, b), modified Lentz. Valid (fast) for
/// x < (a + 1) / (a + b + 2).
fn incbeta_cf(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let num = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + num * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + num * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + num / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    front * f
}

/// Inverse of [`beta_cdf`]: the `q`-quantile of Beta(a, b).
///
/// Bracketed Newton iteration with bisection fallback. The `a = 0` limit
/// returns 0 and the `b = 0` limit returns 1 for every `q`.
pub fn beta_quantile(q: f64, p: BetaParams) -> f64 {
    if p.a == 0.0 {
        return 0.0;
    }
    if p.b == 0.0 {
        return 1.0;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = initial_guess(q, p);
    let mut best = (f64::INFINITY, x);
    for _ in 0..400 {
        let f = beta_cdf(x, p) - q;
        if f.abs() < best.0 {
            best = (f.abs(), x);
        }
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if lo.next_up() >= hi {
            break;
        }
        let dens = p.pdf(x);
        let step = if dens > 0.0 && dens.is_finite() { f / dens } else { f64::NAN };
        let newton = x - step;
        x = if !(newton > lo && newton < hi) {
            0.5 * (lo + hi)
        } else if step.abs() <= 2.0 * f64::EPSILON * x {
            // Newton has stalled below the float spacing; walk one ulp.
            if f < 0.0 {
                x.next_up()
            } else {
                x.next_down()
            }
        } else {
            newton
        };
    }
    best.1
}

fn initial_guess(q: f64, p: BetaParams) -> f64 {
    let (a, b) = (p.a, p.b);
    // Power-law tails: I_x(a,b) ~ x^a / (a B(a,b)) near 0, mirrored near 1.
    let mean = a / (a + b);
    let lnb = ln_beta(a, b);
    let lower = ((q * a).ln() + lnb) / a;
    let upper = ((((1.0 - q) * b).ln()) + lnb) / b;
    let guess = if q < 0.5 {
        lower.exp().min(mean)
    } else {
        1.0 - upper.exp().min(1.0 - mean)
    };
    if guess.is_finite() && guess > 0.0 && guess < 1.0 {
        guess
    } else {
        mean.clamp(1e-12, 1.0 - 1e-12)
    }
}
