//! Radio parameters, cell geometry and i.i.d. Rayleigh fading.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SucrError};

/// Global radio parameters shared by the BS and all UEs.
///
/// Powers are linear. The pilot powers are totals over the pilot sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// BS antenna count `M`.
    pub antennas: usize,
    /// Total uplink pilot power `ρ`.
    pub ul_pilot_power: f64,
    /// Total downlink pilot power `q`.
    pub dl_pilot_power: f64,
    /// Noise power `σ²`.
    pub noise_power: f64,
    /// Number of orthogonal random-access pilots `τ_p`.
    pub pilots: usize,
    /// Number of access-seeking UEs `K`.
    pub users: usize,
    /// Per-UE access probability `P_a`.
    pub access_probability: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            antennas: 100,
            ul_pilot_power: 1.0,
            dl_pilot_power: 1.0,
            noise_power: 1.0,
            pilots: 10,
            users: 50,
            access_probability: 1.0,
        }
    }
}

impl SystemParams {
    pub fn with_antennas(mut self, antennas: usize) -> Self {
        self.antennas = antennas;
        self
    }

    pub fn with_access_probability(mut self, pa: f64) -> Self {
        self.access_probability = pa;
        self
    }

    /// Probability that a given UE picks a given pilot, `P_a / τ_p`.
    pub fn selection_probability(&self) -> f64 {
        self.access_probability / self.pilots as f64
    }

    /// Rejects anything the simulator cannot run, including `σ² = 0`.
    ///
    /// Noiseless parameter sets can still be built directly for unit tests;
    /// they just never pass validation.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ul_pilot_power", self.ul_pilot_power),
            ("dl_pilot_power", self.dl_pilot_power),
            ("noise_power", self.noise_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SucrError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("antennas", self.antennas),
            ("pilots", self.pilots),
            ("users", self.users),
        ] {
            if v == 0 {
                return Err(SucrError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.access_probability) {
            return Err(SucrError::Config(format!(
                "access_probability must lie in [0, 1], got {}",
                self.access_probability
            )));
        }
        Ok(())
    }
}

/// Circular cell with distance-dependent pathloss and log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub radius: f64,
    /// Inner exclusion radius as a fraction of `radius`.
    pub min_distance_factor: f64,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// β of a UE at the cell edge without shadowing, in dB.
    pub cell_edge_snr_db: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            radius: 1.0,
            min_distance_factor: 0.1,
            pathloss_exponent: 3.7,
            shadowing_std_db: 8.0,
            cell_edge_snr_db: 10.0,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SucrError::Config(format!(
                "cell radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.min_distance_factor > 0.0 && self.min_distance_factor < 1.0) {
            return Err(SucrError::Config(format!(
                "min_distance_factor must lie in (0, 1), got {}",
                self.min_distance_factor
            )));
        }
        if !(self.pathloss_exponent > 2.0) {
            return Err(SucrError::Config(format!(
                "pathloss_exponent must exceed 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(SucrError::Config(format!(
                "shadowing_std_db must be nonnegative, got {}",
                self.shadowing_std_db
            )));
        }
        if !self.cell_edge_snr_db.is_finite() {
            return Err(SucrError::Config("cell_edge_snr_db must be finite".into()));
        }
        Ok(())
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance_factor * self.radius
    }

    /// Pathloss constant `C` such that `β(r) = C r^{-κ}` equals the cell-edge SNR.
    pub fn pathloss_constant(&self) -> f64 {
        snr_db_to_beta(self.cell_edge_snr_db) * self.radius.powf(self.pathloss_exponent)
    }

    /// Large-scale gain at `distance` with shadowing realisation `shadow_db`.
    pub fn gain_at(&self, distance: f64, shadow_db: f64) -> f64 {
        self.pathloss_constant()
            * distance.powf(-self.pathloss_exponent)
            * 10f64.powf(shadow_db / 10.0)
    }
}

/// One UE as seen by the protocol: its large-scale gain `β_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTerminal {
    pub beta: f64,
    pub distance: Option<f64>,
}

impl UserTerminal {
    pub fn with_beta(beta: f64) -> Self {
        debug_assert!(beta > 0.0);
        UserTerminal {
            beta,
            distance: None,
        }
    }

    pub fn from_snr_db(snr_db: f64) -> Self {
        Self::with_beta(snr_db_to_beta(snr_db))
    }
}

/// Small-scale channel `h_k ∈ C^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Draws a circularly-symmetric complex Gaussian with total variance `variance`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let std = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(std * re, std * im)
}

/// `h ~ CN(0, β I_M)`.
pub fn sample_channel<R: Rng + ?Sized>(beta: f64, antennas: usize, rng: &mut R) -> ChannelVector {
    ChannelVector((0..antennas).map(|_| complex_gaussian(beta, rng)).collect())
}

/// Drops `count` UEs uniformly by area in the annulus between the minimum
/// distance and the cell radius, with independent shadowing per UE.
pub fn sample_cell_users<R: Rng + ?Sized>(
    cfg: &CellConfig,
    count: usize,
    rng: &mut R,
) -> Vec<UserTerminal> {
    let r0_sq = cfg.min_distance().powi(2);
    let r_sq = cfg.radius.powi(2);
    let shadow = Normal::new(0.0, cfg.shadowing_std_db).expect("validated std");
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let distance = (r0_sq + u * (r_sq - r0_sq)).sqrt();
            let shadow_db = shadow.sample(rng);
            UserTerminal {
                beta: cfg.gain_at(distance, shadow_db),
                distance: Some(distance),
            }
        })
        .collect()
}

/// `10^{snr_db / 10}`; with `ρ = q = σ² = 1` this is β directly.
pub fn snr_db_to_beta(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}
