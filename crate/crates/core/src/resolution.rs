//! Step 3: each contender decides on its own whether it is the strongest.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::error::{Result, SucrError};
use crate::estimators::{estimate, EstimatorKind};
use crate::protocol::{
    dl_receive_with_noise, draw_dl_noise, ls_estimate, precode, ul_receive, ContentionSet,
};

/// Bias `ε_k = δ β_k / √M` added to the activation threshold.
///
/// Positive `δ` makes UEs more reluctant to stay active.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasPolicy {
    pub delta: f64,
}

impl BiasPolicy {
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(SucrError::Config(format!("bias delta must be finite, got {delta}")));
        }
        Ok(BiasPolicy { delta })
    }

    pub fn epsilon(&self, beta: f64, antennas: usize) -> f64 {
        self.delta * beta / (antennas as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Active,
    Inactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Resolved,
    FalsePositive,
    FalseNegative,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub n_contenders: usize,
    pub winners: usize,
    pub classification: Classification,
}

/// Active iff `β > α̂/2 + δβ/√M`.
pub fn decide(beta: f64, alpha_hat: f64, bias: BiasPolicy, antennas: usize) -> Decision {
    if beta > alpha_hat / 2.0 + bias.epsilon(beta, antennas) {
        Decision::Active
    } else {
        Decision::Inactive
    }
}

pub fn classify(decisions: &[Decision]) -> TrialOutcome {
    let n = decisions.len();
    let winners = decisions.iter().filter(|&&d| d == Decision::Active).count();
    let classification = match (n, winners) {
        (0, _) => Classification::Idle,
        (_, 0) => Classification::FalseNegative,
        (_, 1) => Classification::Resolved,
        _ => Classification::FalsePositive,
    };
    TrialOutcome {
        n_contenders: n,
        winners,
        classification,
    }
}

/// Runs Steps 2 and 3 on one pilot and classifies the result.
///
/// Randomness is consumed in a fixed order: uplink receiver noise, then one
/// downlink noise sample per UE in set order. The per-UE decision sees only
/// that UE's `z_k` and `β_k`; the true `α_S` is passed on solely to the oracle.
pub fn resolve_trial<R: Rng + ?Sized>(
    set: &ContentionSet,
    kind: EstimatorKind,
    bias: BiasPolicy,
    params: &SystemParams,
    rng: &mut R,
) -> Result<TrialOutcome> {
    if set.is_empty() {
        return Ok(classify(&[]));
    }
    let obs = ul_receive(set, params, rng);
    let w = precode(&ls_estimate(&obs, params), params)?;
    let etas: Vec<Complex64> = (0..set.len()).map(|_| draw_dl_noise(params, rng)).collect();
    let true_alpha = set.alpha();
    let mut decisions = Vec::with_capacity(set.len());
    for ((user, h), eta) in set.users().iter().zip(set.channels()).zip(etas) {
        let dl = dl_receive_with_noise(h, &w, user.beta, params, eta);
        decisions.push(decide_locally(kind, &dl, bias, true_alpha)?);
    }
    Ok(classify(&decisions))
}

fn decide_locally(
    kind: EstimatorKind,
    dl: &crate::protocol::DlObservation,
    bias: BiasPolicy,
    true_alpha: f64,
) -> Result<Decision> {
    let alpha_hat = estimate(kind, dl, true_alpha)?;
    Ok(decide(dl.beta, alpha_hat, bias, dl.params.antennas))
}
