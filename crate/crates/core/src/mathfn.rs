//! Special functions and samplers used by the downlink likelihood.
//!
//! Everything here works in the natural-log domain where magnitudes can leave
//! the range of `f64`: the density of the real part of the downlink
//! observation is a sum of `2M` signed terms whose individual magnitudes grow
//! rapidly with the antenna count while their ratios stay moderate.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};

use crate::error::{Result, SucrError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `log_gamma` shifts up before applying Stirling's series.
const STIRLING_MIN: f64 = 10.0;

/// Bernoulli-number coefficients `B_2k / (2k (2k-1))` of Stirling's series.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Asymptotic expansion of `Γ(x+½) / (√x Γ(x))` in powers of `1/x`.
const HALFSTEP_COEFFS: [f64; 7] = [
    1.0,
    -1.0 / 8.0,
    1.0 / 128.0,
    5.0 / 1024.0,
    -21.0 / 32_768.0,
    -399.0 / 262_144.0,
    869.0 / 4_194_304.0,
];
const HALFSTEP_SERIES_MIN: u64 = 64;

const INCGAMMA_TOL: f64 = 1e-15;
const INCGAMMA_MIN_ITER: usize = 500;
const LENTZ_TINY: f64 = 1e-300;

/// Sign of a [`LogWeightedTerm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A real number stored as `sign · exp(log_magnitude)`.
///
/// Zero is `(Plus, -inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeightedTerm {
    pub sign: Sign,
    pub log_magnitude: f64,
}

impl LogWeightedTerm {
    pub const ZERO: LogWeightedTerm = LogWeightedTerm {
        sign: Sign::Plus,
        log_magnitude: f64::NEG_INFINITY,
    };

    pub fn new(sign: Sign, log_magnitude: f64) -> Self {
        if log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogWeightedTerm {
                sign,
                log_magnitude,
            }
        }
    }

    pub fn positive(log_magnitude: f64) -> Self {
        Self::new(Sign::Plus, log_magnitude)
    }

    pub fn from_value(value: f64) -> Self {
        let sign = if value < 0.0 { Sign::Minus } else { Sign::Plus };
        Self::new(sign, value.abs().ln())
    }

    pub fn is_zero(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    /// Converts back to a plain float; may under- or overflow.
    pub fn value(&self) -> f64 {
        self.sign.as_f64() * self.log_magnitude.exp()
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SucrError::domain(
            "log_gamma",
            format!("argument must be positive and finite, got {x}"),
        ));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Γ(x)`; callers guarantee `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    // Shift into the Stirling regime, keeping the running product well inside
    // f64 range (at most ~10^10 for x >= 0.5; smaller x adds a few decades).
    let mut shifted = x;
    let mut product = 1.0;
    while shifted < STIRLING_MIN {
        product *= shifted;
        shifted += 1.0;
    }
    let correction = if product == 1.0 { 0.0 } else { product.ln() };
    stirling_ln_gamma(shifted) - correction
}

fn stirling_ln_gamma(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for c in STIRLING_COEFFS {
        series += c * power;
        power *= inv2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series
}

/// `Γ(M + ½) / Γ(M)` for a positive integer `M`.
///
/// Small `M` goes through the log-gamma difference; large `M` through the
/// asymptotic series, which is accurate to well below 1e-15 from `M = 64`
/// upwards and never overflows.
pub fn gamma_ratio_halfstep(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(SucrError::domain(
            "gamma_ratio_halfstep",
            "antenna count must be at least 1",
        ));
    }
    let x = m as f64;
    if m < HALFSTEP_SERIES_MIN {
        return Ok((ln_gamma(x + 0.5) - ln_gamma(x)).exp());
    }
    let inv = 1.0 / x;
    let mut power = 1.0;
    let mut series = 0.0;
    for c in HALFSTEP_COEFFS {
        series += c * power;
        power *= inv;
    }
    Ok(x.sqrt() * series)
}

fn check_incgamma_args(function: &'static str, s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(SucrError::domain(
            function,
            format!("shape must be positive and finite, got {s}"),
        ));
    }
    if !(x >= 0.0) {
        return Err(SucrError::domain(
            function,
            format!("argument must be nonnegative, got {x}"),
        ));
    }
    Ok(())
}

fn incgamma_iteration_cap(s: f64) -> usize {
    // Both expansions need O(sqrt(s)) iterations near the transition x ~ s.
    INCGAMMA_MIN_ITER.max((40.0 * s.sqrt()) as usize)
}

/// `ln P(s, x)` by the power series; valid and used for `x < s + 1`.
fn ln_lower_series(s: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / s;
    let mut sum = term;
    let cap = incgamma_iteration_cap(s);
    let mut converged = false;
    for n in 1..=cap {
        term *= x / (s + n as f64);
        sum += term;
        if term < sum * INCGAMMA_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SucrError::domain(
            "incomplete_gamma",
            format!("series failed to converge for s={s}, x={x}"),
        ));
    }
    Ok(s * x.ln() - x - ln_gamma(s) + sum.ln())
}

/// `ln Q(s, x)` by the modified Lentz continued fraction; used for `x >= s + 1`.
fn ln_upper_continued_fraction(s: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / LENTZ_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    let cap = incgamma_iteration_cap(s);
    let mut converged = false;
    for i in 1..=cap {
        let i = i as f64;
        let an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < LENTZ_TINY {
            d = LENTZ_TINY;
        }
        c = b + an / c;
        if c.abs() < LENTZ_TINY {
            c = LENTZ_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < INCGAMMA_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SucrError::domain(
            "incomplete_gamma",
            format!("continued fraction failed to converge for s={s}, x={x}"),
        ));
    }
    Ok(s * x.ln() - x - ln_gamma(s) + h.ln())
}

/// `ln P(s, x)`, the log of the regularized lower incomplete gamma function.
pub fn ln_reg_lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    check_incgamma_args("reg_lower_incomplete_gamma", s, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        ln_lower_series(s, x)
    } else {
        let ln_q = ln_upper_continued_fraction(s, x)?;
        Ok((-ln_q.exp()).ln_1p())
    }
}

/// `ln Q(s, x)`, the log of the regularized upper incomplete gamma function.
///
/// Stays finite where `Q` itself underflows.
pub fn ln_reg_upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    check_incgamma_args("reg_upper_incomplete_gamma", s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if x < s + 1.0 {
        let ln_p = ln_lower_series(s, x)?;
        Ok((-ln_p.exp()).ln_1p())
    } else {
        ln_upper_continued_fraction(s, x)
    }
}

/// `P(s, x) = γ(s, x) / Γ(s)`.
pub fn reg_lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    Ok(ln_reg_lower_incomplete_gamma(s, x)?.exp().clamp(0.0, 1.0))
}

/// `Q(s, x) = 1 - P(s, x)`, computed directly rather than by subtraction.
pub fn reg_upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    Ok(ln_reg_upper_incomplete_gamma(s, x)?.exp().clamp(0.0, 1.0))
}

/// Sign and log-magnitude of `Σ sign_i · exp(log_magnitude_i)`.
///
/// The largest magnitude is factored out before exponentiating. Exact
/// cancellation returns [`LogWeightedTerm::ZERO`], as does an empty slice.
pub fn signed_log_sum_exp(terms: &[LogWeightedTerm]) -> LogWeightedTerm {
    let max = terms
        .iter()
        .map(|t| t.log_magnitude)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return LogWeightedTerm::ZERO;
    }
    if max == f64::INFINITY {
        // Any infinite magnitude dominates; mixed-sign infinities are undefined.
        let mut signs = terms
            .iter()
            .filter(|t| t.log_magnitude == f64::INFINITY)
            .map(|t| t.sign);
        let first = signs.next().unwrap_or(Sign::Plus);
        if signs.all(|s| s == first) {
            return LogWeightedTerm::new(first, f64::INFINITY);
        }
        return LogWeightedTerm::new(Sign::Plus, f64::NAN);
    }
    // Separate positive and negative parts so the only subtraction happens once.
    let mut pos = 0.0;
    let mut neg = 0.0;
    for t in terms {
        let w = (t.log_magnitude - max).exp();
        match t.sign {
            Sign::Plus => pos += w,
            Sign::Minus => neg += w,
        }
    }
    let total = pos - neg;
    if total == 0.0 {
        return LogWeightedTerm::ZERO;
    }
    let sign = if total > 0.0 { Sign::Plus } else { Sign::Minus };
    LogWeightedTerm::new(sign, max + total.abs().ln())
}

/// Draws from the chi distribution with `dof` degrees of freedom.
pub fn sample_chi<R: Rng + ?Sized>(dof: u32, rng: &mut R) -> f64 {
    assert!(dof >= 1, "chi distribution needs at least one degree of freedom");
    let chi2 = ChiSquared::new(dof as f64).expect("dof is positive");
    chi2.sample(rng).sqrt()
}

/// `ln(√π)`, handy for Gaussian normalizers.
pub(crate) const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;
