//! Trial bookkeeping and the deterministic parallel reduction.
//!
//! Trials only ever produce integer counts, and integer addition is
//! associative, so the totals do not depend on how rayon splits the work.

use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SucrError};
use crate::resolution::{Classification, TrialOutcome};

/// z-score of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Outcome counts over a batch of trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tally {
    pub resolved: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub idle: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: &TrialOutcome) {
        match outcome.classification {
            Classification::Resolved => self.resolved += 1,
            Classification::FalsePositive => self.false_positive += 1,
            Classification::FalseNegative => self.false_negative += 1,
            Classification::Idle => self.idle += 1,
        }
    }

    pub fn of(outcome: &TrialOutcome) -> Self {
        let mut t = Tally::default();
        t.record(outcome);
        t
    }

    pub fn total(&self) -> u64 {
        self.non_idle() + self.idle
    }

    pub fn non_idle(&self) -> u64 {
        self.resolved + self.false_positive + self.false_negative
    }

    /// Fraction of all trials, idle ones included, that ended resolved.
    pub fn resolved_fraction_of_all(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.resolved as f64 / self.total() as f64
        }
    }

    /// A result row with probabilities conditioned on a non-idle pilot.
    ///
    /// A batch with no contended pilot at all yields zeros throughout.
    pub fn to_row(&self, sweep_value: f64, pa_used: Option<f64>) -> ResultRow {
        let n = self.non_idle();
        let (p_resolved, p_false_positive, p_false_negative) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let nf = n as f64;
            (
                self.resolved as f64 / nf,
                self.false_positive as f64 / nf,
                self.false_negative as f64 / nf,
            )
        };
        ResultRow {
            sweep_value,
            pa_used,
            p_resolved,
            p_false_positive,
            p_false_negative,
            ci_halfwidth: ci_halfwidth(p_resolved, n),
            trials_effective: n,
        }
    }
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            resolved: self.resolved + o.resolved,
            false_positive: self.false_positive + o.false_positive,
            false_negative: self.false_negative + o.false_negative,
            idle: self.idle + o.idle,
        }
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        *self = *self + o;
    }
}

/// 95% normal-approximation half-width for a proportion over `n` trials.
pub fn ci_halfwidth(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// One row of an experiment's output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub pa_used: Option<f64>,
    pub p_resolved: f64,
    pub p_false_positive: f64,
    pub p_false_negative: f64,
    pub ci_halfwidth: f64,
    pub trials_effective: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

/// Runs `trial(i)` for `i in 0..trials` on the current rayon pool and adds up
/// the per-trial tallies. Each slot of the returned vector is one tally
/// (trials may report several, e.g. one per access probability).
///
/// The first failing trial aborts the batch.
pub fn tally_trials<F>(trials: u64, slots: usize, trial: F) -> Result<Vec<Tally>>
where
    F: Fn(u64) -> Result<Vec<Tally>> + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let t = trial(i)?;
            debug_assert_eq!(t.len(), slots);
            Ok(t)
        })
        .try_reduce(
            || vec![Tally::default(); slots],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}

/// Builds a dedicated pool. `None` uses rayon's default thread count.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(SucrError::Config("thread count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| SucrError::Config(format!("cannot start worker threads: {e}")))
}
