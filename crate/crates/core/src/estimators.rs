//! UE-side estimation of the contention sum-gain `α_S` from `z_k`.
//!
//! Conditioned on `α`, the downlink observation splits into a scaled chi
//! variable with `2M` degrees of freedom plus independent complex Gaussian
//! noise (see [`crate::protocol::split_observation`]). The real part therefore
//! has the density of a chi ⊛ Gaussian convolution, which expands into `2M`
//! terms involving incomplete gamma functions; the imaginary part is pure
//! Gaussian noise.
//!
//! Two evaluators of the real-part density exist:
//!
//! * [`log_f1`] builds all `2M` signed summands as [`LogWeightedTerm`]s from
//!   direct incomplete-gamma evaluations and sums them with
//!   [`signed_log_sum_exp`]. It is the reference.
//! * [`LikelihoodKernel`] evaluates the same sum with the incomplete gamma
//!   values obtained by recurrence in `s`, which is what makes the
//!   200-point likelihood scan affordable inside Monte Carlo loops.

use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::error::{Result, SucrError};
use crate::mathfn::{
    gamma_ratio_halfstep, ln_gamma, ln_reg_lower_incomplete_gamma, ln_reg_upper_incomplete_gamma,
    signed_log_sum_exp, LogWeightedTerm, Sign, LN_SQRT_PI,
};
use crate::protocol::DlObservation;

/// Number of log-spaced points in the coarse likelihood scan.
pub const ML_GRID_POINTS: usize = 200;
/// Relative tolerance of the golden-section refinement.
pub const ML_REL_TOL: f64 = 1e-6;
/// The approximate estimator reports `ALPHA_SATURATION_FACTOR · β` when its
/// unclamped value is not finite (`z_re = 0`).
pub const ALPHA_SATURATION_FACTOR: f64 = 1e12;

/// Series results whose magnitude drops this many nats below the largest
/// summand are treated as lost to cancellation.
const CANCELLATION_NATS: f64 = 23.0;
/// Arguments `x` of the incomplete gamma functions below which the recurrence
/// kernel defers to the reference path (the downward recurrence would
/// overflow its scaled accumulators).
const KERNEL_MIN_X: f64 = 1e-50;
const RESCALE_AT: f64 = 1e200;
const RESCALE_BY: f64 = 1e-200;
const RESCALE_LN: f64 = 460.517_018_598_809_1; // 200 ln 10
/// Summands below this fraction of the largest are dropped by the kernel.
const KERNEL_NEGLIGIBLE: f64 = 1e-22;

/// Positive half of the 10-point Gauss–Legendre rule on [-1, 1].
const GAUSS_LEGENDRE_10: [(f64, f64); 5] = [
    (0.148_874_338_981_631_22, 0.295_524_224_714_753),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_5),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_36),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_07),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Maximum-likelihood estimate from the exact density of `z_k`.
    Ml,
    /// Closed-form inversion of the mean of `Re z_k`.
    Approx,
    /// Perfect knowledge of `α_S` (simulation baseline).
    Oracle,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Ml => "ml",
            EstimatorKind::Approx => "approx",
            EstimatorKind::Oracle => "oracle",
        })
    }
}

/// Variances of the two parts of `z_k` for a hypothesised `α`.
///
/// `lambda1` scales the chi part (`g² ~ (λ1/2) χ²_{2M}`) and `lambda2` is the
/// variance of the complex Gaussian part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Lambdas {
    pub fn new(beta: f64, alpha: f64, params: &SystemParams) -> Self {
        let rho = params.ul_pilot_power;
        let q = params.dl_pilot_power;
        let lambda1 = rho * q * beta * beta / (rho * alpha + params.noise_power);
        let lambda2 = params.noise_power + q * beta - lambda1;
        Lambdas { lambda1, lambda2 }
    }
}

fn check_hypothesis(function: &'static str, alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(SucrError::domain(function, format!("beta must be positive, got {beta}")));
    }
    if !(alpha >= beta && alpha.is_finite()) {
        return Err(SucrError::domain(
            function,
            format!("alpha must be finite and at least beta={beta}, got {alpha}"),
        ));
    }
    Ok(())
}

/// `ln` of the normaliser shared by every summand, including the Gaussian
/// exponent that does not depend on the summation index.
fn f1_prefactor(z: f64, m: usize, lam: &Lambdas) -> f64 {
    let Lambdas { lambda1: l1, lambda2: l2 } = *lam;
    -(z * z / l2) * (1.0 - l1 / (l1 + l2))
        - ln_gamma(m as f64)
        - m as f64 * l1.ln()
        - LN_SQRT_PI
        - 0.5 * l2.ln()
}

/// `ln f1(0)`: only the `n = 2M-1` summand survives.
fn ln_f1_at_zero(m: usize, lam: &Lambdas) -> f64 {
    -(m as f64) * (1.0 + lam.lambda1 / lam.lambda2).ln() - LN_SQRT_PI - 0.5 * lam.lambda2.ln()
}

/// Log-density of `Re z_k` given `α`, from the full signed series.
///
/// For negative `z_re` the series alternates in sign; if cancellation eats
/// more than ~1e-10 of its relative precision the value comes from direct
/// quadrature of the chi ⊛ Gaussian integral instead.
pub fn log_f1(z_re: f64, alpha: f64, beta: f64, params: &SystemParams) -> Result<f64> {
    check_hypothesis("log_f1", alpha, beta)?;
    if !z_re.is_finite() {
        return Err(SucrError::domain("log_f1", format!("observation must be finite, got {z_re}")));
    }
    let m = params.antennas;
    if m == 0 {
        return Err(SucrError::domain("log_f1", "antenna count must be at least 1"));
    }
    let lam = Lambdas::new(beta, alpha, params);
    if !(lam.lambda2 > 0.0) {
        return Err(SucrError::domain("log_f1", "noise variance must be positive"));
    }
    if z_re == 0.0 {
        return Ok(ln_f1_at_zero(m, &lam));
    }
    let (l1, l2) = (lam.lambda1, lam.lambda2);
    let a = 1.0 / l1 + 1.0 / l2;
    let x = z_re * z_re / l2 * (l1 / (l1 + l2));
    let ln_zl = (z_re.abs() / l2).ln();
    let ln_a = a.ln();
    let top = 2 * m - 1;
    let ln_fact_top = ln_gamma(2.0 * m as f64);

    let mut terms = Vec::with_capacity(2 * m);
    for n in 0..2 * m {
        let s = (n as f64 + 1.0) / 2.0;
        let power = (top - n) as f64;
        let ln_binom = ln_fact_top - ln_gamma(n as f64 + 1.0) - ln_gamma(power + 1.0);
        let ln_weight = ln_binom + power * ln_zl - (2.0 * m as f64 - s) * ln_a + ln_gamma(s);
        let (sign, ln_bracket) = if z_re > 0.0 {
            if n % 2 == 0 {
                // Γ(s) + γ(s, x) = Γ(s) (1 + P)
                (Sign::Plus, ln_reg_lower_incomplete_gamma(s, x)?.exp().ln_1p())
            } else {
                // Γ(s) - γ(s, x) = Γ(s) Q
                (Sign::Plus, ln_reg_upper_incomplete_gamma(s, x)?)
            }
        } else {
            let sign = if (top - n) % 2 == 1 { Sign::Minus } else { Sign::Plus };
            (sign, ln_reg_upper_incomplete_gamma(s, x)?)
        };
        terms.push(LogWeightedTerm::new(sign, ln_weight + ln_bracket));
    }
    let sum = signed_log_sum_exp(&terms);
    if z_re < 0.0 {
        let largest = terms.iter().map(|t| t.log_magnitude).fold(f64::NEG_INFINITY, f64::max);
        if sum.sign == Sign::Minus || sum.log_magnitude < largest - CANCELLATION_NATS {
            return Ok(ln_f1_by_quadrature(z_re, m, &lam));
        }
    }
    Ok(f1_prefactor(z_re, m, &lam) + sum.log_magnitude)
}

/// `ln f1(z)` as `ln ∫_0^∞ f_g(g) φ(z - g) dg` by composite Gauss–Legendre.
///
/// The log-integrand is strictly concave with curvature at least
/// `2(1/λ1 + 1/λ2)`, so the integral is confined to a few widths around its
/// mode.
fn ln_f1_by_quadrature(z: f64, m: usize, lam: &Lambdas) -> f64 {
    let (l1, l2) = (lam.lambda1, lam.lambda2);
    let power = (2 * m - 1) as f64;
    let a = 1.0 / l1 + 1.0 / l2;
    let phi = |g: f64| {
        let log_g = if power == 0.0 { 0.0 } else { power * g.ln() };
        log_g - g * g / l1 - (z - g) * (z - g) / l2
    };
    let b = z / l2;
    let mode = (b + (b * b + 2.0 * a * power).sqrt()) / (2.0 * a);
    let sigma = 1.0 / (power / (mode * mode) + 2.0 * a).sqrt();
    let peak = phi(mode);
    let lo = (mode - 12.0 * sigma).max(0.0);
    let mut reach = sigma;
    while phi(mode + reach) - peak > -75.0 {
        reach *= 1.5;
    }
    let hi = mode + reach;
    let panels = (((hi - lo) / sigma).ceil() as usize).clamp(16, 2000);
    let width = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        for (node, weight) in GAUSS_LEGENDRE_10 {
            for g in [mid - half * node, mid + half * node] {
                if g > 0.0 {
                    acc += weight * half * (phi(g) - peak).exp();
                }
            }
        }
    }
    LN_2 - ln_gamma(m as f64) - m as f64 * l1.ln() - LN_SQRT_PI - 0.5 * l2.ln() + peak + acc.ln()
}

/// Log-density of `Im z_k` given `α`: zero-mean Gaussian with variance `λ2/2`.
pub fn log_f2(z_im: f64, alpha: f64, beta: f64, params: &SystemParams) -> f64 {
    let l2 = Lambdas::new(beta, alpha, params).lambda2;
    -0.5 * (PI * l2).ln() - z_im * z_im / l2
}

/// Approximate estimate, with a flag for the saturated `z_re = 0` case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxEstimate {
    pub alpha: f64,
    pub saturated: bool,
}

fn halfstep_ratio(params: &SystemParams) -> f64 {
    gamma_ratio_halfstep(params.antennas as u64).expect("validated antenna count")
}

/// Closed-form estimate from `Re z_k` alone; the imaginary part is ignored.
///
/// Inverts `z_re ≈ √(ρqβ²/(ρα+σ²)) Γ(M+½)/Γ(M)` for `α` and clamps at `β`.
pub fn approx_estimate_detailed(obs: &DlObservation) -> ApproxEstimate {
    let p = &obs.params;
    let ratio = halfstep_ratio(p);
    let z_re = obs.z.re;
    let unclamped = ratio * ratio * p.dl_pilot_power * obs.beta * obs.beta / (z_re * z_re)
        - p.noise_power / p.ul_pilot_power;
    if !unclamped.is_finite() {
        return ApproxEstimate {
            alpha: ALPHA_SATURATION_FACTOR * obs.beta,
            saturated: true,
        };
    }
    ApproxEstimate {
        alpha: unclamped.max(obs.beta),
        saturated: false,
    }
}

pub fn approx_estimate(obs: &DlObservation) -> f64 {
    approx_estimate_detailed(obs).alpha
}

pub fn oracle_estimate(true_alpha: f64) -> f64 {
    true_alpha
}

/// Precomputed tables and scratch space for fast likelihood evaluation at a
/// fixed antenna count.
///
/// Same-parity summands obey `t_{n+2} = t_n r_n` with
/// `r_n = (2M-1-n)(2M-2-n) a λ2² / (2(n+2) z²)`, decreasing in `n`, so each
/// parity is walked outward from its peak with multiplications only until the
/// terms become negligible. The incomplete gamma factors over that window come
/// from unit-step recurrences in `s`, seeded by one direct evaluation each.
#[derive(Debug, Clone)]
pub struct LikelihoodKernel {
    antennas: usize,
    ln_gamma_m: f64,
    /// `ln C(2M-1, n) + ln Γ((n+1)/2)` for `n = 0..2M`.
    ln_binom_gamma: Vec<f64>,
    /// `ln Γ(j + ½)` for `j = 0..=M`.
    ln_gamma_half: Vec<f64>,
    /// `ln Γ(i)` for `i = 0..=M` (entry 0 unused).
    ln_gamma_int: Vec<f64>,
    /// Relative summand weights, valid inside the current window.
    weight: Vec<f64>,
    /// `P(j + ½, x)` indexed by `j`.
    p_half: Vec<f64>,
    /// `Q(j + 1, x)` indexed by `j`.
    q_int: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Window {
    lo: usize,
    hi: usize,
}

impl LikelihoodKernel {
    pub fn new(antennas: usize) -> Self {
        assert!(antennas >= 1, "antenna count must be at least 1");
        let len = 2 * antennas;
        let ln_fact_top = ln_gamma(len as f64);
        let ln_binom_gamma = (0..len)
            .map(|n| {
                let n_f = n as f64;
                ln_fact_top - ln_gamma(n_f + 1.0) - ln_gamma((len - n) as f64)
                    + ln_gamma((n_f + 1.0) / 2.0)
            })
            .collect();
        let mut ln_gamma_int = vec![f64::INFINITY];
        ln_gamma_int.extend((1..=antennas).map(|i| ln_gamma(i as f64)));
        LikelihoodKernel {
            antennas,
            ln_gamma_m: ln_gamma(antennas as f64),
            ln_binom_gamma,
            ln_gamma_half: (0..=antennas).map(|j| ln_gamma(j as f64 + 0.5)).collect(),
            ln_gamma_int,
            weight: vec![0.0; len],
            p_half: vec![0.0; antennas],
            q_int: vec![0.0; antennas],
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Same value as [`log_f1`], computed with recurrences. Falls back to
    /// [`log_f1`] where the recurrences are unsafe (`z_re <= 0` or a
    /// vanishing incomplete-gamma argument).
    pub fn log_f1(&mut self, z_re: f64, alpha: f64, beta: f64, params: &SystemParams) -> Result<f64> {
        check_hypothesis("log_f1", alpha, beta)?;
        if params.antennas != self.antennas {
            return Err(SucrError::domain(
                "log_f1",
                format!("kernel built for M={}, asked for M={}", self.antennas, params.antennas),
            ));
        }
        let lam = Lambdas::new(beta, alpha, params);
        let (l1, l2) = (lam.lambda1, lam.lambda2);
        let x = z_re * z_re / l2 * (l1 / (l1 + l2));
        if !(z_re > 0.0) || !z_re.is_finite() || !(x >= KERNEL_MIN_X) || !(l2 > 0.0) {
            return log_f1(z_re, alpha, beta, params);
        }
        let m = self.antennas;
        let a = 1.0 / l1 + 1.0 / l2;
        let zl = z_re / l2;
        let ln_zl = zl.ln();
        let ln_a = a.ln();
        let c = a / (zl * zl);

        let peaks = [self.peak(0, c), self.peak(1, c)];
        let peak_logs = peaks.map(|n| self.ln_weight(n, ln_zl, ln_a));
        let reference = peak_logs[0].max(peak_logs[1]) + LN_2;
        let even = self.walk(peaks[0], (peak_logs[0] - reference).exp(), c);
        let odd = self.walk(peaks[1], (peak_logs[1] - reference).exp(), c);

        self.fill_lower_half(x, even.lo / 2, even.hi / 2)?;
        self.fill_upper_integer(x, odd.lo / 2, odd.hi / 2)?;

        let mut sum = 0.0;
        for n in (even.lo..=even.hi).step_by(2) {
            sum += self.weight[n] * (1.0 + self.p_half[n / 2]);
        }
        for n in (odd.lo..=odd.hi).step_by(2) {
            sum += self.weight[n] * self.q_int[n / 2];
        }
        let prefactor = -(z_re * zl) * (1.0 - l1 / (l1 + l2))
            - self.ln_gamma_m
            - m as f64 * l1.ln()
            - LN_SQRT_PI
            - 0.5 * l2.ln();
        Ok(prefactor + reference + sum.ln())
    }

    fn ratio(&self, n: usize, c: f64) -> f64 {
        let top = (2 * self.antennas - 1 - n) as f64;
        top * (top - 1.0) * c / (2.0 * (n as f64 + 2.0))
    }

    fn ln_weight(&self, n: usize, ln_zl: f64, ln_a: f64) -> f64 {
        let len = 2 * self.antennas;
        self.ln_binom_gamma[n] + (len - 1 - n) as f64 * ln_zl
            - (len as f64 - (n as f64 + 1.0) / 2.0) * ln_a
    }

    /// Largest summand of the given parity: the first `n` with `r_n < 1`.
    fn peak(&self, parity: usize, c: f64) -> usize {
        let (mut lo, mut hi) = (0usize, self.antennas - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.ratio(parity + 2 * mid, c) < 1.0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        parity + 2 * lo
    }

    /// Fills `weight` outward from `start` and returns the retained range.
    fn walk(&mut self, start: usize, t0: f64, c: f64) -> Window {
        let len = 2 * self.antennas;
        self.weight[start] = t0;
        let mut t = t0;
        let mut hi = start;
        while hi + 2 < len {
            t *= self.ratio(hi, c);
            if t < KERNEL_NEGLIGIBLE {
                break;
            }
            hi += 2;
            self.weight[hi] = t;
        }
        t = t0;
        let mut lo = start;
        while lo >= 2 {
            t /= self.ratio(lo - 2, c);
            if t < KERNEL_NEGLIGIBLE {
                break;
            }
            lo -= 2;
            self.weight[lo] = t;
        }
        Window { lo, hi }
    }

    /// `P(j + ½, x)` for `j ∈ [lo, hi]`, by downward recurrence
    /// `P(s) = P(s+1) + x^s e^{-x} / Γ(s+1)`.
    fn fill_lower_half(&mut self, x: f64, lo: usize, hi: usize) -> Result<()> {
        let mut scale = ln_reg_lower_incomplete_gamma(hi as f64 + 0.5, x)?;
        let mut scale_exp = scale.exp();
        self.p_half[hi] = scale_exp.min(1.0);
        if lo == hi {
            return Ok(());
        }
        let ln_x = x.ln();
        // u_j = x^{j+½} e^{-x} / Γ(j+3/2), starting at j = hi-1
        let j = hi - 1;
        let mut u = ((j as f64 + 0.5) * ln_x - x - self.ln_gamma_half[j + 1] - scale).exp();
        let mut v = 1.0;
        for j in (lo..hi).rev() {
            v += u;
            self.p_half[j] = (v * scale_exp).min(1.0);
            u *= (j as f64 + 0.5) / x;
            if v > RESCALE_AT || u > RESCALE_AT {
                v *= RESCALE_BY;
                u *= RESCALE_BY;
                scale += RESCALE_LN;
                scale_exp = scale.exp();
            }
        }
        Ok(())
    }

    /// `Q(j + 1, x)` for `j ∈ [lo, hi]`, by upward recurrence
    /// `Q(i+1) = Q(i) + x^i e^{-x} / Γ(i+1)`.
    fn fill_upper_integer(&mut self, x: f64, lo: usize, hi: usize) -> Result<()> {
        let i0 = lo + 1;
        let mut scale = ln_reg_upper_incomplete_gamma(i0 as f64, x)?;
        let mut scale_exp = scale.exp();
        self.q_int[lo] = scale_exp.min(1.0);
        if lo == hi {
            return Ok(());
        }
        let ln_x = x.ln();
        // w_i = x^i e^{-x} / i!, starting at i = i0
        let ln_fact = if i0 < self.antennas {
            self.ln_gamma_int[i0 + 1]
        } else {
            ln_gamma(i0 as f64 + 1.0)
        };
        let mut w = (i0 as f64 * ln_x - x - ln_fact - scale).exp();
        let mut v = 1.0;
        for j in lo + 1..=hi {
            v += w;
            self.q_int[j] = (v * scale_exp).min(1.0);
            w *= x / (j as f64 + 1.0);
            if v > RESCALE_AT || w > RESCALE_AT {
                v *= RESCALE_BY;
                w *= RESCALE_BY;
                scale += RESCALE_LN;
                scale_exp = scale.exp();
            }
        }
        Ok(())
    }

    /// `ln f1(Re z) + ln f2(Im z)`; `-inf` where the density is unusable.
    pub fn log_likelihood(&mut self, z: Complex64, alpha: f64, beta: f64, params: &SystemParams) -> f64 {
        match self.log_f1(z.re, alpha, beta, params) {
            Ok(v) if !v.is_nan() => v + log_f2(z.im, alpha, beta, params),
            _ => f64::NEG_INFINITY,
        }
    }

    /// Maximises the likelihood over `α ∈ [β, α_max]`.
    ///
    /// A 200-point log-spaced scan locates the best grid cell and a
    /// golden-section search in `ln α` refines it. Ties go to the smaller `α`.
    pub fn ml_estimate(&mut self, obs: &DlObservation) -> Result<f64> {
        let beta = obs.beta;
        let params = &obs.params;
        if !obs.z.re.is_finite() || !obs.z.im.is_finite() {
            return Err(SucrError::Estimation(format!("non-finite observation {}", obs.z)));
        }
        let approx = approx_estimate_detailed(obs);
        let alpha_max = if approx.saturated {
            100.0 * beta
        } else {
            (100.0 * beta).max(10.0 * approx.alpha)
        };
        let ln_lo = beta.ln();
        let ln_span = alpha_max.ln() - ln_lo;
        let grid = |i: usize| {
            if i == 0 {
                beta
            } else {
                (ln_lo + ln_span * i as f64 / (ML_GRID_POINTS - 1) as f64).exp()
            }
        };

        let mut best_i = None;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..ML_GRID_POINTS {
            let val = self.log_likelihood(obs.z, grid(i), beta, params);
            if val.is_finite() && val > best_val {
                best_val = val;
                best_i = Some(i);
            }
        }
        let best_i = best_i.ok_or_else(|| {
            SucrError::Estimation(format!(
                "likelihood not finite anywhere on [{beta}, {alpha_max}] for z={}",
                obs.z
            ))
        })?;

        let mut lo = grid(best_i.saturating_sub(1)).ln();
        let mut hi = grid((best_i + 1).min(ML_GRID_POINTS - 1)).ln();
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let mut fc = self.log_likelihood(obs.z, c.exp(), beta, params);
        let mut fd = self.log_likelihood(obs.z, d.exp(), beta, params);
        while hi - lo > ML_REL_TOL {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = self.log_likelihood(obs.z, c.exp(), beta, params);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = self.log_likelihood(obs.z, d.exp(), beta, params);
            }
        }
        let refined = (0.5 * (lo + hi)).exp().max(beta);
        let refined_val = self.log_likelihood(obs.z, refined, beta, params);
        let grid_alpha = grid(best_i);
        if refined_val > best_val && refined > grid_alpha {
            Ok(refined)
        } else if refined_val >= best_val && refined <= grid_alpha {
            Ok(refined)
        } else {
            Ok(grid_alpha)
        }
    }
}

thread_local! {
    static KERNEL: RefCell<Option<LikelihoodKernel>> = const { RefCell::new(None) };
}

/// ML estimate of `α_S` from `z_k`, reusing a per-thread kernel.
pub fn ml_estimate(obs: &DlObservation) -> Result<f64> {
    if obs.params.antennas == 0 {
        return Err(SucrError::Estimation("antenna count must be at least 1".into()));
    }
    KERNEL.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.as_ref().map(|k| k.antennas()) != Some(obs.params.antennas) {
            *slot = Some(LikelihoodKernel::new(obs.params.antennas));
        }
        slot.as_mut().expect("kernel just installed").ml_estimate(obs)
    })
}

/// Estimate by `kind`. `true_alpha` is read only by the oracle.
pub fn estimate(kind: EstimatorKind, obs: &DlObservation, true_alpha: f64) -> Result<f64> {
    match kind {
        EstimatorKind::Ml => ml_estimate(obs),
        EstimatorKind::Approx => Ok(approx_estimate(obs)),
        EstimatorKind::Oracle => Ok(oracle_estimate(true_alpha)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize) -> SystemParams {
        SystemParams::default().with_antennas(m)
    }

    /// Noiseless asymptotic mean of `Re z_k` for a given `α`.
    fn mean_z(beta: f64, alpha: f64, p: &SystemParams) -> f64 {
        let lam1 = Lambdas::new(beta, alpha, p).lambda1;
        lam1.sqrt() * halfstep_ratio(p)
    }

    #[test]
    fn lambdas_sum_identity() {
        let p = SystemParams {
            ul_pilot_power: 2.5,
            dl_pilot_power: 0.7,
            noise_power: 1.3,
            ..params(10)
        };
        for &beta in &[0.01, 1.0, 37.0] {
            for &mult in &[1.0, 1.7, 50.0] {
                let l = Lambdas::new(beta, beta * mult, &p);
                assert!((l.lambda1 + l.lambda2 - (1.3 + 0.7 * beta)).abs() < 1e-12 * (1.0 + beta));
                assert!(l.lambda1 > 0.0 && l.lambda2 > 0.0);
            }
        }
    }

    #[test]
    fn f2_peak() {
        let p = params(10);
        let l2 = Lambdas::new(1.0, 2.0, &p).lambda2;
        assert!((log_f2(0.0, 2.0, 1.0, &p) + 0.5 * (PI * l2).ln()).abs() < 1e-14);
    }

    #[test]
    fn f1_rejects_bad_inputs() {
        let p = params(5);
        assert!(log_f1(f64::NAN, 2.0, 1.0, &p).is_err());
        assert!(log_f1(1.0, 0.5, 1.0, &p).is_err());
        assert!(log_f1(1.0, 2.0, -1.0, &p).is_err());
    }

    #[test]
    fn f1_continuous_through_zero() {
        let p = params(6);
        let at_zero = log_f1(0.0, 3.0, 1.0, &p).unwrap();
        let right = log_f1(1e-7, 3.0, 1.0, &p).unwrap();
        let left = log_f1(-1e-7, 3.0, 1.0, &p).unwrap();
        assert!((at_zero - right).abs() < 1e-5);
        assert!((at_zero - left).abs() < 1e-5);
    }

    #[test]
    fn negative_tail_quadrature_agrees_with_series() {
        // Mild negative z where the alternating series is still accurate.
        let p = params(3);
        let lam = Lambdas::new(1.0, 2.0, &p);
        for z in [-0.2, -0.5, -1.0] {
            let series = log_f1(z, 2.0, 1.0, &p).unwrap();
            let quad = ln_f1_by_quadrature(z, 3, &lam);
            assert!((series - quad).abs() < 1e-9, "z={z}: {series} vs {quad}");
        }
        // Far tail: finite and decreasing.
        let p = params(100);
        let a = log_f1(-5.0, 20.0, 10.0, &p).unwrap();
        let b = log_f1(-10.0, 20.0, 10.0, &p).unwrap();
        assert!(a.is_finite() && b.is_finite() && b < a);
    }

    #[test]
    fn positive_quadrature_agrees_with_series() {
        let p = params(10);
        for &(beta, alpha) in &[(1.0, 2.0), (10.0, 20.0), (2.0, 2.0)] {
            let lam = Lambdas::new(beta, alpha, &p);
            for z in [0.3, 1.0, 3.0, 6.0] {
                let series = log_f1(z, alpha, beta, &p).unwrap();
                let quad = ln_f1_by_quadrature(z, 10, &lam);
                assert!((series - quad).abs() < 1e-9, "z={z}: {series} vs {quad}");
            }
        }
    }

    #[test]
    fn kernel_matches_reference() {
        for &m in &[1usize, 2, 7, 50, 300] {
            let p = params(m);
            let mut kernel = LikelihoodKernel::new(m);
            for &beta in &[0.3, 2.5, 10.0, 40.0] {
                for &mult in &[1.0, 1.3, 3.0, 30.0] {
                    let alpha = beta * mult;
                    let centre = mean_z(beta, alpha, &p);
                    for &f in &[0.01, 0.3, 0.8, 1.0, 1.2, 2.5] {
                        let z = centre * f;
                        let reference = log_f1(z, alpha, beta, &p).unwrap();
                        let fast = kernel.log_f1(z, alpha, beta, &p).unwrap();
                        assert!(
                            (reference - fast).abs() < 1e-9 * reference.abs().max(1.0),
                            "M={m} beta={beta} alpha={alpha} z={z}: {reference} vs {fast}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn approx_inverts_the_mean() {
        let p = params(200);
        let beta = 3.0;
        for &mult in &[1.0, 5.0] {
            let obs = DlObservation {
                z: Complex64::new(mean_z(beta, mult * beta, &p), 0.4),
                beta,
                params: p,
            };
            assert!((approx_estimate(&obs) - mult * beta).abs() < 1e-9 * mult * beta);
        }
        let loud = DlObservation {
            z: Complex64::new(1e6, 0.0),
            beta,
            params: p,
        };
        assert_eq!(approx_estimate(&loud), beta);
        let silent = DlObservation {
            z: Complex64::new(0.0, 1.0),
            beta,
            params: p,
        };
        let est = approx_estimate_detailed(&silent);
        assert!(est.saturated);
        assert_eq!(est.alpha, ALPHA_SATURATION_FACTOR * beta);
    }

    #[test]
    fn approx_nonincreasing_in_observed_gain() {
        let p = params(50);
        let mut prev = f64::INFINITY;
        for i in 1..400 {
            let obs = DlObservation {
                z: Complex64::new(0.05 * i as f64, 0.0),
                beta: 2.0,
                params: p,
            };
            let a = approx_estimate(&obs);
            assert!(a <= prev && a >= 2.0);
            prev = a;
        }
    }

    #[test]
    fn ml_at_noiseless_mean() {
        // Maximiser found independently by high-precision quadrature of the
        // chi-Gaussian convolution; it sits 2.06% below the true 2β because
        // the mean of Re z is not the mode of the likelihood.
        let p = params(100);
        let beta = 10.0;
        let obs = DlObservation {
            z: Complex64::new(mean_z(beta, 2.0 * beta, &p), 0.0),
            beta,
            params: p,
        };
        let est = ml_estimate(&obs).unwrap();
        assert!((est - 19.588_788_117_902_23).abs() < 1e-4, "{est}");
    }

    #[test]
    fn ml_respects_lower_bound() {
        let p = params(20);
        for z in [-3.0, 0.0, 0.1, 5.0, 50.0, 1e3] {
            let obs = DlObservation {
                z: Complex64::new(z, 0.3),
                beta: 1.5,
                params: p,
            };
            let est = ml_estimate(&obs).unwrap();
            assert!(est >= 1.5, "z={z}: {est}");
        }
        let obs = DlObservation {
            z: Complex64::new(f64::NAN, 0.0),
            beta: 1.5,
            params: p,
        };
        assert!(ml_estimate(&obs).is_err());
    }

    #[test]
    fn oracle_passthrough() {
        assert_eq!(oracle_estimate(7.0), 7.0);
    }
}
