//! Monte Carlo experiments: the two-user sweep and the cell experiments with
//! an optimized access probability.
//!
//! # Randomness
//!
//! Every trial draws from its own counter-derived streams, so results do not
//! depend on scheduling. Within a cell trial, the pilot-selection uniforms,
//! UE positions, small-scale fading and receiver noise are shared by every
//! access probability on the grid: the contention set for `P_a` is
//! `{k : u_k < P_a/τ_p}`, which nests as `P_a` grows. Sweeps over the
//! antenna count or the bias reuse the same trial streams too.

use std::collections::BTreeMap;

use rand::Rng;

use super::config::{ExperimentConfig, Preset};
use super::engine::{tally_trials, thread_pool, ExperimentResult, ResultRow, Tally};
use crate::channel::{sample_cell_users, sample_channel, snr_db_to_beta, CellConfig, ChannelVector, SystemParams, UserTerminal};
use crate::error::{Result, SucrError};
use crate::estimators::EstimatorKind;
use crate::protocol::{contention_size_pmf, detect_activity, ls_estimate, ul_receive, ContentionSet};
use crate::resolution::{resolve_trial, BiasPolicy, TrialOutcome};
use crate::rng::{lane, StreamSeeder};

const TAG_TWO_USER: u64 = 1;
const TAG_CELL: u64 = 2;
const TAG_STRATIFIED: u64 = 3;
const TAG_DETECTION: u64 = 4;

/// Runs whatever the config's preset asks for on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    match cfg.preset {
        Preset::TwoUserSweep => run_two_user_sweep(cfg),
        Preset::AntennasSweep => run_antennas_sweep(cfg),
        Preset::BiasSweep => run_bias_sweep(cfg),
        Preset::Custom => run_custom(cfg),
    }
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    thread_pool(threads)?.install(|| run_experiment(cfg))
}

fn expect_preset(cfg: &ExperimentConfig, preset: Preset) -> Result<()> {
    cfg.validate()?;
    if cfg.preset != preset {
        return Err(SucrError::Config(format!(
            "expected a {preset} config, got {}",
            cfg.preset
        )));
    }
    Ok(())
}

fn bias(delta: f64) -> Result<BiasPolicy> {
    BiasPolicy::new(delta)
}

/// One two-user trial: fixed gains, fresh fading and noise.
fn two_user_outcome(
    seeder: &StreamSeeder,
    trial: u64,
    betas: [f64; 2],
    params: &SystemParams,
    kind: EstimatorKind,
    bias: BiasPolicy,
) -> Result<TrialOutcome> {
    let users: Vec<UserTerminal> = betas.iter().map(|&b| UserTerminal::with_beta(b)).collect();
    let channels = users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            sample_channel(u.beta, params.antennas, &mut seeder.stream(trial, lane::UE_BASE + k as u64))
        })
        .collect();
    let set = ContentionSet::new(users, channels)?;
    resolve_trial(&set, kind, bias, params, &mut seeder.stream(trial, lane::NOISE))
}

fn two_user_seeder(cfg: &ExperimentConfig, point: usize) -> StreamSeeder {
    StreamSeeder::new(cfg.seed).derive(TAG_TWO_USER).derive(point as u64)
}

fn two_user_betas(cfg: &ExperimentConfig, snr_db: f64) -> [f64; 2] {
    [snr_db_to_beta(cfg.reference_snr_db), snr_db_to_beta(snr_db)]
}

/// Two UEs on one pilot: UE 1 at `reference_snr_db`, UE 2 at each SNR of
/// `sweep_grid`. One row per SNR, with `sweep_value` the SNR of UE 2 in dB.
pub fn run_two_user_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_preset(cfg, Preset::TwoUserSweep)?;
    let bias = bias(cfg.primary_bias())?;
    let mut rows = Vec::with_capacity(cfg.sweep_grid.len());
    for (point, &snr) in cfg.sweep_grid.iter().enumerate() {
        let seeder = two_user_seeder(cfg, point);
        let betas = two_user_betas(cfg, snr);
        let tally = tally_trials(cfg.trials, 1, |t| {
            let o = two_user_outcome(&seeder, t, betas, &cfg.params, cfg.estimator, bias)?;
            Ok(vec![Tally::of(&o)])
        })?;
        rows.push(tally[0].to_row(snr, None));
    }
    Ok(ExperimentResult { rows })
}

/// Two-user sweep results for the ML and the approximate estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorComparison {
    pub ml: ExperimentResult,
    pub approx: ExperimentResult,
}

impl EstimatorComparison {
    /// Largest pointwise gap in resolution probability.
    pub fn max_gap(&self) -> f64 {
        self.ml
            .rows
            .iter()
            .zip(&self.approx.rows)
            .map(|(a, b)| (a.p_resolved - b.p_resolved).abs())
            .fold(0.0, f64::max)
    }
}

/// The two-user sweep run with both estimators on identical observations.
/// The config's own estimator choice is ignored.
pub fn run_two_user_comparison(cfg: &ExperimentConfig) -> Result<EstimatorComparison> {
    expect_preset(cfg, Preset::TwoUserSweep)?;
    let bias = bias(cfg.primary_bias())?;
    let mut ml = Vec::new();
    let mut approx = Vec::new();
    for (point, &snr) in cfg.sweep_grid.iter().enumerate() {
        let seeder = two_user_seeder(cfg, point);
        let betas = two_user_betas(cfg, snr);
        let tallies = tally_trials(cfg.trials, 2, |t| {
            let a = two_user_outcome(&seeder, t, betas, &cfg.params, EstimatorKind::Ml, bias)?;
            let b = two_user_outcome(&seeder, t, betas, &cfg.params, EstimatorKind::Approx, bias)?;
            Ok(vec![Tally::of(&a), Tally::of(&b)])
        })?;
        ml.push(tallies[0].to_row(snr, None));
        approx.push(tallies[1].to_row(snr, None));
    }
    Ok(EstimatorComparison {
        ml: ExperimentResult { rows: ml },
        approx: ExperimentResult { rows: approx },
    })
}

/// Weighted average of per-size resolution probabilities over the binomial
/// law of the contention size, conditioned on `N ≥ 1`. Sizes missing from
/// the map count as never resolved.
pub fn aggregate_p_resolved(per_n: &BTreeMap<usize, f64>, params: &SystemParams) -> f64 {
    let busy = 1.0 - contention_size_pmf(params, 0);
    if busy <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = per_n
        .iter()
        .filter(|&(&n, _)| n >= 1 && n <= params.users)
        .map(|(&n, &p)| contention_size_pmf(params, n) * p)
        .sum();
    weighted / busy
}

/// Settings of one cell experiment at a fixed antenna count.
#[derive(Debug, Clone, Copy)]
pub struct CellSetup<'a> {
    pub params: SystemParams,
    pub cell: CellConfig,
    pub estimator: EstimatorKind,
    pub bias: BiasPolicy,
    pub pa_grid: &'a [f64],
    pub trials: u64,
    pub seed: u64,
}

/// Outcome tallies over an access-probability grid, from common random
/// numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct PaScan {
    pub pa_grid: Vec<f64>,
    pub tallies: Vec<Tally>,
}

impl PaScan {
    /// Index maximising the fraction of all pilots that end with exactly
    /// one winner; ties go to the smallest `P_a`.
    ///
    /// This is the throughput-relevant objective: a pilot nobody picked
    /// resolves nothing. Maximising the share among busy pilots instead
    /// would favour vanishing `P_a`.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.tallies.len() {
            let (a, b) = (&self.tallies[i], &self.tallies[best]);
            // resolved_i / total_i > resolved_best / total_best, exactly
            let lhs = a.resolved as u128 * b.total() as u128;
            let rhs = b.resolved as u128 * a.total() as u128;
            if lhs > rhs || (lhs == rhs && self.pa_grid[i] < self.pa_grid[best]) {
                best = i;
            }
        }
        best
    }

    /// `(P_a*, row at P_a*)` with the row's probabilities conditioned on a
    /// busy pilot.
    pub fn best_row(&self, sweep_value: f64) -> (f64, ResultRow) {
        let i = self.best_index();
        let pa = self.pa_grid[i];
        (pa, self.tallies[i].to_row(sweep_value, Some(pa)))
    }
}

fn cell_seeder(seed: u64) -> StreamSeeder {
    StreamSeeder::new(seed).derive(TAG_CELL)
}

/// Draws the `P_a`-independent part of a cell trial: selection uniforms and
/// gains for all `K` UEs, and fading for those that select the pilot at the
/// largest probability of interest.
fn draw_cell_population(
    seeder: &StreamSeeder,
    trial: u64,
    params: &SystemParams,
    cell: &CellConfig,
    max_pa: f64,
) -> (Vec<f64>, Vec<UserTerminal>, Vec<(usize, ChannelVector)>) {
    let mut sel = seeder.stream(trial, lane::SELECTION);
    let u: Vec<f64> = (0..params.users).map(|_| sel.random::<f64>()).collect();
    let users = sample_cell_users(cell, params.users, &mut seeder.stream(trial, lane::GEOMETRY));
    let threshold = max_pa / params.pilots as f64;
    let candidates = (0..params.users)
        .filter(|&k| u[k] < threshold)
        .map(|k| {
            let mut rng = seeder.stream(trial, lane::UE_BASE + k as u64);
            (k, sample_channel(users[k].beta, params.antennas, &mut rng))
        })
        .collect();
    (u, users, candidates)
}

/// Evaluates every access probability of `setup.pa_grid` on shared trials.
pub fn scan_access_probability(setup: &CellSetup<'_>) -> Result<PaScan> {
    setup.params.validate()?;
    setup.cell.validate()?;
    let seeder = cell_seeder(setup.seed);
    let max_pa = setup.pa_grid.iter().cloned().fold(0.0, f64::max);
    let p = &setup.params;
    let tallies = tally_trials(setup.trials, setup.pa_grid.len(), |t| {
        let (u, users, candidates) = draw_cell_population(&seeder, t, p, &setup.cell, max_pa);
        let mut out = Vec::with_capacity(setup.pa_grid.len());
        for &pa in setup.pa_grid {
            let threshold = pa / p.pilots as f64;
            let (members, channels): (Vec<_>, Vec<_>) = candidates
                .iter()
                .filter(|(k, _)| u[*k] < threshold)
                .map(|(k, h)| (users[*k], h.clone()))
                .unzip();
            let set = ContentionSet::new(members, channels)?;
            let mut noise = seeder.stream(t, lane::NOISE);
            let o = resolve_trial(&set, setup.estimator, setup.bias, p, &mut noise)?;
            out.push(Tally::of(&o));
        }
        Ok(out)
    })?;
    Ok(PaScan {
        pa_grid: setup.pa_grid.to_vec(),
        tallies,
    })
}

fn cell_setup(cfg: &ExperimentConfig, antennas: usize, delta: f64) -> Result<CellSetup<'_>> {
    Ok(CellSetup {
        params: cfg.params.with_antennas(antennas),
        cell: cfg.cell_or_default(),
        estimator: cfg.estimator,
        bias: bias(delta)?,
        pa_grid: &cfg.pa_grid,
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

/// Best access probability on the config's grid for its antenna count and
/// first bias value, with the resolution probability (among busy pilots)
/// reached there.
pub fn optimize_pa(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let scan = scan_access_probability(&cell_setup(cfg, cfg.params.antennas, cfg.primary_bias())?)?;
    let (pa, row) = scan.best_row(0.0);
    Ok((pa, row.p_resolved))
}

/// One row per antenna count in `sweep_grid`, each at its own best `P_a`.
pub fn run_antennas_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_preset(cfg, Preset::AntennasSweep)?;
    sweep_antennas(cfg)
}

/// Like the antennas sweep, with any estimator and the first bias value.
pub fn run_custom(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_preset(cfg, Preset::Custom)?;
    sweep_antennas(cfg)
}

fn sweep_antennas(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    for m in cfg.antenna_counts()? {
        let scan = scan_access_probability(&cell_setup(cfg, m, cfg.primary_bias())?)?;
        rows.push(scan.best_row(m as f64).1);
    }
    Ok(ExperimentResult { rows })
}

/// One row per bias value in `bias_grid`, each at its own best `P_a`.
pub fn run_bias_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_preset(cfg, Preset::BiasSweep)?;
    let mut rows = Vec::new();
    for &delta in &cfg.bias_grid {
        let scan = scan_access_probability(&cell_setup(cfg, cfg.params.antennas, delta)?)?;
        rows.push(scan.best_row(delta).1);
    }
    Ok(ExperimentResult { rows })
}

/// Resolution probability for each contention size `N = 1..=max_n` with UEs
/// dropped in the cell, `trials` trials per size. Feed the result to
/// [`aggregate_p_resolved`] for the stratified estimate of the busy-pilot
/// resolution probability.
pub fn resolve_by_contention_size(
    setup: &CellSetup<'_>,
    max_n: usize,
) -> Result<BTreeMap<usize, f64>> {
    setup.params.validate()?;
    setup.cell.validate()?;
    let base = StreamSeeder::new(setup.seed).derive(TAG_STRATIFIED);
    let p = &setup.params;
    let mut out = BTreeMap::new();
    for n in 1..=max_n {
        let seeder = base.derive(n as u64);
        let tally = tally_trials(setup.trials, 1, |t| {
            let users = sample_cell_users(&setup.cell, n, &mut seeder.stream(t, lane::GEOMETRY));
            let channels = users
                .iter()
                .enumerate()
                .map(|(k, u)| {
                    sample_channel(u.beta, p.antennas, &mut seeder.stream(t, lane::UE_BASE + k as u64))
                })
                .collect();
            let set = ContentionSet::new(users, channels)?;
            let o = resolve_trial(&set, setup.estimator, setup.bias, p, &mut seeder.stream(t, lane::NOISE))?;
            Ok(vec![Tally::of(&o)])
        })?;
        out.insert(n, tally[0].resolved as f64 / setup.trials as f64);
    }
    Ok(out)
}

/// Error rates of the BS activity detector in the cell experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionErrors {
    /// Busy pilots declared idle, as a fraction of busy pilots.
    pub missed: f64,
    /// Idle pilots declared busy, as a fraction of idle pilots.
    pub false_alarm: f64,
    pub busy_trials: u64,
    pub idle_trials: u64,
}

/// Runs the activity detector with threshold parameter `beta_min` at the
/// access probability `pa` and reports how often it is wrong.
pub fn detection_error_rates(
    params: &SystemParams,
    cell: &CellConfig,
    pa: f64,
    beta_min: f64,
    trials: u64,
    seed: u64,
) -> Result<DetectionErrors> {
    let params = params.with_access_probability(pa);
    params.validate()?;
    cell.validate()?;
    let seeder = StreamSeeder::new(seed).derive(TAG_DETECTION);
    // slots: [busy & missed, busy & detected, idle & alarm, idle & quiet]
    let counts = tally_trials(trials, 1, |t| {
        let (u, users, candidates) = draw_cell_population(&seeder, t, &params, cell, pa);
        let threshold = pa / params.pilots as f64;
        let (members, channels): (Vec<_>, Vec<_>) = candidates
            .into_iter()
            .filter(|(k, _)| u[*k] < threshold)
            .map(|(k, h)| (users[k], h))
            .unzip();
        let set = ContentionSet::new(members, channels)?;
        let y = ul_receive(&set, &params, &mut seeder.stream(t, lane::NOISE));
        let fired = detect_activity(&ls_estimate(&y, &params), &params, beta_min);
        let mut tally = Tally::default();
        match (set.is_empty(), fired) {
            (false, false) => tally.false_negative += 1,
            (false, true) => tally.resolved += 1,
            (true, true) => tally.false_positive += 1,
            (true, false) => tally.idle += 1,
        }
        Ok(vec![tally])
    })?[0];
    let busy = counts.false_negative + counts.resolved;
    let idle = counts.false_positive + counts.idle;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(DetectionErrors {
        missed: ratio(counts.false_negative, busy),
        false_alarm: ratio(counts.false_positive, idle),
        busy_trials: busy,
        idle_trials: idle,
    })
}
