//! `sucr-sim`: run collision-resolution experiments from the command line.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! failures while running or writing results.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sucr_core::harness::{emit_results, run_experiment_with_threads, ExperimentConfig, OutputFormat, Preset};
use sucr_core::SucrError;

#[derive(Parser)]
#[command(name = "sucr-sim", version, about = "Strongest-user collision resolution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its results.
    Run {
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// TOML config overriding the preset defaults. Its preset must match.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default configs of the figure presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    TwoUser,
    Antennas,
    Bias,
    Custom,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Preset {
        match p {
            PresetArg::TwoUser => Preset::TwoUserSweep,
            PresetArg::Antennas => Preset::AntennasSweep,
            PresetArg::Bias => Preset::BiasSweep,
            PresetArg::Custom => Preset::Custom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> OutputFormat {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            preset,
            config,
            out,
            format,
            seed,
            trials,
            threads,
        } => {
            let cfg = match load_run_config(preset.into(), config, seed, trials) {
                Ok(cfg) => cfg,
                Err(e) => return fail(EXIT_CONFIG, &e),
            };
            if threads == Some(0) {
                eprintln!("error: --threads must be at least 1");
                return ExitCode::from(EXIT_CONFIG);
            }
            let result = match run_experiment_with_threads(&cfg, threads) {
                Ok(r) => r,
                Err(e) if e.is_config_error() => return fail(EXIT_CONFIG, &e),
                Err(e) => return fail(EXIT_RUNTIME, &e),
            };
            if let Err(e) = emit_results(&result, &cfg, &out, format.into()) {
                return fail(EXIT_RUNTIME, &e);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::from_path(&config) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.preset);
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, &e),
        },
        Command::Presets => {
            let mut stdout = std::io::stdout().lock();
            for preset in [Preset::TwoUserSweep, Preset::AntennasSweep, Preset::BiasSweep] {
                let cfg = ExperimentConfig::preset_default(preset);
                let text = match cfg.to_toml_string() {
                    Ok(text) => text,
                    Err(e) => return fail(EXIT_RUNTIME, &e),
                };
                // A closed pipe (e.g. `| head`) is not an error worth reporting.
                if writeln!(stdout, "# --preset {preset}\n{text}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
    }
}

fn load_run_config(
    preset: Preset,
    path: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<u64>,
) -> Result<ExperimentConfig, SucrError> {
    let mut cfg = match path {
        Some(p) => {
            let cfg = ExperimentConfig::from_path(&p)?;
            if cfg.preset != preset {
                return Err(SucrError::Config(format!(
                    "{} is a {} config but --preset {preset} was given",
                    p.display(),
                    cfg.preset
                )));
            }
            cfg
        }
        None => ExperimentConfig::preset_default(preset),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fail(code: u8, err: &SucrError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}
