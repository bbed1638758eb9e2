//! Steps 1 and 2 of the access protocol for a single pilot.
//!
//! The BS sees the superposition `y` of every contender's channel on the
//! pilot, forms the least-squares estimate, and answers with a downlink pilot
//! precoded along that estimate. Each contender then observes one complex
//! scalar `z_k`, which is all it gets to judge the collision.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::channel::{complex_gaussian, norm_sqr, sample_channel, ChannelVector, SystemParams, UserTerminal};
use crate::error::{Result, SucrError};
use crate::mathfn::ln_gamma;

/// UEs that picked the pilot under study, with their channel realisations.
#[derive(Debug, Clone, Default)]
pub struct ContentionSet {
    users: Vec<UserTerminal>,
    channels: Vec<ChannelVector>,
}

impl ContentionSet {
    pub fn new(users: Vec<UserTerminal>, channels: Vec<ChannelVector>) -> Result<Self> {
        if users.len() != channels.len() {
            return Err(SucrError::DegenerateInput(format!(
                "{} users but {} channels",
                users.len(),
                channels.len()
            )));
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|h| h.len() != first.len()) {
                return Err(SucrError::DegenerateInput(
                    "channel vectors differ in length".into(),
                ));
            }
        }
        Ok(ContentionSet { users, channels })
    }

    /// Draws fresh Rayleigh channels of length `antennas` for `users`.
    pub fn draw<R: Rng + ?Sized>(users: Vec<UserTerminal>, antennas: usize, rng: &mut R) -> Self {
        let channels = users
            .iter()
            .map(|u| sample_channel(u.beta, antennas, rng))
            .collect();
        ContentionSet { users, channels }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[UserTerminal] {
        &self.users
    }

    pub fn channels(&self) -> &[ChannelVector] {
        &self.channels
    }

    /// Sum of the contenders' large-scale gains, `α_S`.
    pub fn alpha(&self) -> f64 {
        self.users.iter().map(|u| u.beta).sum()
    }
}

/// Despread uplink signal `y` on one pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct UlPilotObservation {
    pub y: Vec<Complex64>,
}

/// What UE `k` knows after Step 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlObservation {
    pub z: Complex64,
    pub beta: f64,
    pub params: SystemParams,
}

/// `N ~ B(K, P_a / τ_p)`.
pub fn draw_contention_size<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> usize {
    let p = params.selection_probability();
    if p <= 0.0 {
        return 0;
    }
    Binomial::new(params.users as u64, p.min(1.0))
        .expect("probability within [0, 1]")
        .sample(rng) as usize
}

/// Probability that exactly `n` of the `K` UEs pick a given pilot.
pub fn contention_size_pmf(params: &SystemParams, n: usize) -> f64 {
    binomial_pmf(params.users, params.selection_probability(), n)
}

pub(crate) fn binomial_pmf(trials: usize, p: f64, n: usize) -> f64 {
    if n > trials {
        return 0.0;
    }
    if p <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if n == trials { 1.0 } else { 0.0 };
    }
    let (k, n) = (trials as f64, n as f64);
    let ln_choose = ln_gamma(k + 1.0) - ln_gamma(n + 1.0) - ln_gamma(k - n + 1.0);
    (ln_choose + n * p.ln() + (k - n) * (-p).ln_1p()).exp()
}

/// Probability that two or more UEs collide on a given pilot.
pub fn collision_probability(params: &SystemParams) -> f64 {
    let p = params.selection_probability();
    let k = params.users as f64;
    let idle = (1.0 - p).powf(k);
    let single = k * p * (1.0 - p).powf(k - 1.0);
    (1.0 - idle - single).clamp(0.0, 1.0)
}

/// `y = √ρ Σ_{i∈S} h_i + n`, `n ~ CN(0, σ² I_M)`.
///
/// With `σ² = 0` no noise is drawn at all.
pub fn ul_receive<R: Rng + ?Sized>(
    set: &ContentionSet,
    params: &SystemParams,
    rng: &mut R,
) -> UlPilotObservation {
    let sqrt_rho = params.ul_pilot_power.sqrt();
    let mut y = vec![Complex64::new(0.0, 0.0); params.antennas];
    for h in set.channels() {
        debug_assert_eq!(h.len(), params.antennas);
        for (yi, hi) in y.iter_mut().zip(h.as_slice()) {
            *yi += hi * sqrt_rho;
        }
    }
    if params.noise_power > 0.0 {
        for yi in y.iter_mut() {
            *yi += complex_gaussian(params.noise_power, rng);
        }
    }
    UlPilotObservation { y }
}

/// `ĥ_LS = y / √ρ`.
pub fn ls_estimate(obs: &UlPilotObservation, params: &SystemParams) -> Vec<Complex64> {
    let scale = 1.0 / params.ul_pilot_power.sqrt();
    obs.y.iter().map(|v| v * scale).collect()
}

/// Decides whether anybody used the pilot: `‖ĥ‖²/M > σ²/ρ + β_min/2`.
pub fn detect_activity(estimate: &[Complex64], params: &SystemParams, beta_min: f64) -> bool {
    let energy = norm_sqr(estimate) / estimate.len() as f64;
    energy > params.noise_power / params.ul_pilot_power + beta_min / 2.0
}

/// MRT precoder along the estimate, `w = √q ĥ / ‖ĥ‖`.
pub fn precode(estimate: &[Complex64], params: &SystemParams) -> Result<Vec<Complex64>> {
    let norm = norm_sqr(estimate).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(SucrError::DegenerateInput(
            "cannot precode along a zero channel estimate".into(),
        ));
    }
    let scale = params.dl_pilot_power.sqrt() / norm;
    Ok(estimate.iter().map(|v| v * scale).collect())
}

/// Draws the UE-side receiver noise `η_k ~ CN(0, σ²)`.
pub fn draw_dl_noise<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Complex64 {
    if params.noise_power > 0.0 {
        complex_gaussian(params.noise_power, rng)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `z_k = h_k^H w + η_k` for a given noise sample.
pub fn dl_receive_with_noise(
    channel: &ChannelVector,
    w: &[Complex64],
    beta: f64,
    params: &SystemParams,
    eta: Complex64,
) -> DlObservation {
    let inner: Complex64 = channel
        .as_slice()
        .iter()
        .zip(w)
        .map(|(h, wi)| h.conj() * wi)
        .sum();
    DlObservation {
        z: inner + eta,
        beta,
        params: *params,
    }
}

/// `z_k = h_k^H w + η_k` with freshly drawn noise.
pub fn dl_receive<R: Rng + ?Sized>(
    channel: &ChannelVector,
    w: &[Complex64],
    beta: f64,
    params: &SystemParams,
    rng: &mut R,
) -> DlObservation {
    let eta = draw_dl_noise(params, rng);
    dl_receive_with_noise(channel, w, beta, params, eta)
}

/// Splits `z_k` into the scaled-chi part `g_k` and the Gaussian part `ν_k`.
///
/// Needs simulator-side knowledge of the whole contention set (through `α_S`)
/// and of the UE noise sample `eta` that produced `z_k`. With that,
/// `g + ν` reproduces [`dl_receive_with_noise`] for the precoder built from
/// the same `obs`.
pub fn split_observation(
    set: &ContentionSet,
    k: usize,
    obs: &UlPilotObservation,
    params: &SystemParams,
    eta: Complex64,
) -> Result<(f64, Complex64)> {
    let user = set.users().get(k).ok_or_else(|| {
        SucrError::DegenerateInput(format!("user index {k} outside a set of {}", set.len()))
    })?;
    let beta = user.beta;
    let h = set.channels()[k].as_slice();
    let rho = params.ul_pilot_power;
    let mmse_gain = rho.sqrt() * beta / (rho * set.alpha() + params.noise_power);
    let h_mmse: Vec<Complex64> = obs.y.iter().map(|v| v * mmse_gain).collect();
    let mmse_norm = norm_sqr(&h_mmse).sqrt();
    if !(mmse_norm > 0.0) {
        return Err(SucrError::DegenerateInput("zero MMSE estimate".into()));
    }
    let sqrt_q = params.dl_pilot_power.sqrt();
    let g = sqrt_q * mmse_norm;
    let projected_error: Complex64 = h
        .iter()
        .zip(&h_mmse)
        .map(|(hi, mi)| (hi - mi).conj() * mi)
        .sum();
    let nu = projected_error * (sqrt_q / mmse_norm) + eta;
    Ok((g, nu))
}
