//! Experiment configuration: TOML schema, preset defaults and validation.
//!
//! A config file names a preset and overrides any subset of its defaults.
//! Unknown keys are rejected so that a typo cannot silently fall back to a
//! default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{CellConfig, SystemParams};
use crate::error::{Result, SucrError};
use crate::estimators::EstimatorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Two fixed UEs on one pilot; sweep the second UE's SNR.
    TwoUserSweep,
    /// Cell experiment with optimized `P_a`; sweep the antenna count.
    AntennasSweep,
    /// Cell experiment with optimized `P_a`; sweep the bias `δ`.
    BiasSweep,
    /// Cell experiment over antenna counts with any estimator and one bias.
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::TwoUserSweep,
        Preset::AntennasSweep,
        Preset::BiasSweep,
        Preset::Custom,
    ];

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Preset::TwoUserSweep => "two-user",
            Preset::AntennasSweep => "antennas",
            Preset::BiasSweep => "bias",
            Preset::Custom => "custom",
        }
    }

    fn uses_cell(self) -> bool {
        !matches!(self, Preset::TwoUserSweep)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Preset {
    type Err = SucrError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.cli_name() == s)
            .ok_or_else(|| SucrError::Config(format!("unknown preset '{s}'")))
    }
}

/// Access probabilities `0.02, 0.04, …, 1.0`.
pub fn default_pa_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub params: SystemParams,
    pub cell: Option<CellConfig>,
    pub estimator: EstimatorKind,
    /// Bias values `δ`. The bias sweep visits all of them; the other presets
    /// use the first.
    pub bias_grid: Vec<f64>,
    /// `β2` in dB for the two-user sweep, antenna counts for the antennas and
    /// custom presets. Unused by the bias sweep.
    pub sweep_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub pa_grid: Vec<f64>,
    /// SNR of the fixed UE in the two-user sweep, in dB.
    pub reference_snr_db: f64,
}

/// On-disk form: everything but the preset is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Preset,
    params: Option<SystemParams>,
    cell: Option<CellConfig>,
    estimator: Option<EstimatorKind>,
    bias_grid: Option<Vec<f64>>,
    sweep_grid: Option<Vec<f64>>,
    trials: Option<u64>,
    seed: Option<u64>,
    pa_grid: Option<Vec<f64>>,
    reference_snr_db: Option<f64>,
}

impl ExperimentConfig {
    pub fn preset_default(preset: Preset) -> Self {
        let base = ExperimentConfig {
            preset,
            params: SystemParams::default(),
            cell: Some(CellConfig::default()),
            estimator: EstimatorKind::Approx,
            bias_grid: vec![0.0],
            sweep_grid: vec![1.0, 10.0, 25.0, 50.0, 100.0, 200.0, 300.0],
            trials: 10_000,
            seed: 1,
            pa_grid: default_pa_grid(),
            reference_snr_db: 10.0,
        };
        match preset {
            Preset::TwoUserSweep => ExperimentConfig {
                cell: None,
                estimator: EstimatorKind::Ml,
                sweep_grid: (4..=16).map(f64::from).collect(),
                ..base
            },
            Preset::AntennasSweep | Preset::Custom => base,
            Preset::BiasSweep => ExperimentConfig {
                bias_grid: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                sweep_grid: Vec::new(),
                ..base
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| SucrError::Config(e.message().to_string()))?;
        let d = Self::preset_default(file.preset);
        let cfg = ExperimentConfig {
            preset: file.preset,
            params: file.params.unwrap_or(d.params),
            cell: file.cell.or(d.cell),
            estimator: file.estimator.unwrap_or(d.estimator),
            bias_grid: file.bias_grid.unwrap_or(d.bias_grid),
            sweep_grid: file.sweep_grid.unwrap_or(d.sweep_grid),
            trials: file.trials.unwrap_or(d.trials),
            seed: file.seed.unwrap_or(d.seed),
            pa_grid: file.pa_grid.unwrap_or(d.pa_grid),
            reference_snr_db: file.reference_snr_db.unwrap_or(d.reference_snr_db),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SucrError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SucrError::Config(msg) => SucrError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SucrError::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials == 0 {
            return Err(SucrError::Config("trials must be at least 1".into()));
        }
        if self.bias_grid.is_empty() {
            return Err(SucrError::Config("bias_grid must not be empty".into()));
        }
        if let Some(d) = self.bias_grid.iter().find(|d| !d.is_finite()) {
            return Err(SucrError::Config(format!("bias values must be finite, got {d}")));
        }
        match self.preset {
            Preset::TwoUserSweep => {
                self.require_sweep_grid()?;
                if let Some(v) = self.sweep_grid.iter().find(|v| !v.is_finite()) {
                    return Err(SucrError::Config(format!("SNR values must be finite, got {v}")));
                }
                if !self.reference_snr_db.is_finite() {
                    return Err(SucrError::Config("reference_snr_db must be finite".into()));
                }
            }
            Preset::AntennasSweep | Preset::Custom => {
                self.require_sweep_grid()?;
                self.antenna_counts()?;
            }
            Preset::BiasSweep => {}
        }
        if self.preset == Preset::AntennasSweep && self.estimator != EstimatorKind::Approx {
            return Err(SucrError::Config(
                "the antennas preset runs the approx estimator; use the custom preset for others"
                    .into(),
            ));
        }
        if self.preset.uses_cell() {
            match &self.cell {
                Some(cell) => cell.validate()?,
                None => return Err(SucrError::Config("a [cell] section is required".into())),
            }
            if self.pa_grid.is_empty() {
                return Err(SucrError::Config("pa_grid must not be empty".into()));
            }
            if let Some(p) = self.pa_grid.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
                return Err(SucrError::Config(format!(
                    "access probabilities must lie in (0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    fn require_sweep_grid(&self) -> Result<()> {
        if self.sweep_grid.is_empty() {
            return Err(SucrError::Config("sweep_grid must not be empty".into()));
        }
        Ok(())
    }

    /// `sweep_grid` read as antenna counts.
    pub fn antenna_counts(&self) -> Result<Vec<usize>> {
        self.sweep_grid
            .iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 && v <= 1e6 {
                    Ok(v as usize)
                } else {
                    Err(SucrError::Config(format!(
                        "antenna counts must be positive integers, got {v}"
                    )))
                }
            })
            .collect()
    }

    /// The bias used by presets that run a single `δ`.
    pub fn primary_bias(&self) -> f64 {
        self.bias_grid[0]
    }

    /// The cell section, falling back to defaults for presets that ignore it.
    pub fn cell_or_default(&self) -> CellConfig {
        self.cell.unwrap_or_default()
    }
}
