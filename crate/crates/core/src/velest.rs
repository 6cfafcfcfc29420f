//! Adaptive instantaneous-velocity estimation.
//!
//! The policy-improvement target needs the marginal velocity of the
//! Boltzmann distribution `pi(a_0|s) ∝ exp(Q(s, a_0)/alpha)`, written as a
//! conditional expectation of `(a_t - a_0)/t`. Two proposals estimate it by
//! self-normalized importance sampling: the closed-form Gaussian conditional
//! (exact for small `t`) and the current policy (increasingly accurate for
//! large `t`), combined with Kish effective-sample-size weights.
//!
//! All weight arithmetic stays in log space with a log-sum-exp shift; the
//! partition constant of the conditional never materializes.

use rand::Rng;

use crate::divnet::AvgDivergenceNet;
use crate::error::{Error, Result};
use crate::meanflow::{sample_action, AvgVelocityNet};
use crate::stats;

/// Scalar soft-value oracle used for importance weights and action selection.
pub trait QFunction {
    fn q_value(&self, s: &[f64], a: &[f64]) -> f64;
}

impl<F: Fn(&[f64], &[f64]) -> f64> QFunction for F {
    fn q_value(&self, s: &[f64], a: &[f64]) -> f64 {
        self(s, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalSource {
    Policy,
    Gaussian,
}

/// K proposal draws with their exact (or estimated) log-densities.
#[derive(Debug, Clone)]
pub struct ProposalBatch {
    pub samples: Vec<Vec<f64>>,
    pub log_proposal: Vec<f64>,
    pub source: ProposalSource,
}

/// One SNIS estimate: the weighted velocity, the Kish effective sample size
/// `(sum w)^2 / sum w^2`, and the normalized weights.
#[derive(Debug, Clone)]
pub struct SnisResult {
    pub velocity: Vec<f64>,
    pub ess: f64,
    pub normalized_weights: Vec<f64>,
}

/// ESS-weighted combination of the two proposals.
#[derive(Debug, Clone)]
pub struct VelocityEstimate {
    pub velocity: Vec<f64>,
    /// Kish ESS per component; 0.0 marks a proposal that was skipped (K = 0).
    pub component_ess: [f64; 2],
    pub combination_weights: [f64; 2],
}

/// Gaussian conditional proposal `N(a_t/(1-t), (t/(1-t))^2 I)` with exact
/// log-densities.
pub fn gaussian_proposal<R: Rng + ?Sized>(
    a_t: &[f64],
    t: f64,
    k: usize,
    rng: &mut R,
) -> ProposalBatch {
    assert!(t > 0.0 && t < 1.0, "t must be strictly inside (0, 1)");
    assert!(k >= 1, "need at least one sample");
    let mean: Vec<f64> = a_t.iter().map(|x| x / (1.0 - t)).collect();
    let std = t / (1.0 - t);
    let mut samples = Vec::with_capacity(k);
    let mut log_proposal = Vec::with_capacity(k);
    for _ in 0..k {
        let z = stats::draw_standard_normal(rng, a_t.len());
        let a0: Vec<f64> = mean.iter().zip(&z).map(|(m, zj)| m + std * zj).collect();
        log_proposal.push(stats::isotropic_normal_logpdf(&a0, &mean, std));
        samples.push(a0);
    }
    ProposalBatch {
        samples,
        log_proposal,
        source: ProposalSource::Gaussian,
    }
}

/// Policy proposal: K actions sampled through the mean-flow chain, with
/// log-densities from the accumulated average divergence.
pub fn policy_proposal<R: Rng + ?Sized>(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    s: &[f64],
    k: usize,
    t_steps: usize,
    rng: &mut R,
) -> Result<ProposalBatch> {
    assert!(k >= 1, "need at least one sample");
    let mut samples = Vec::with_capacity(k);
    let mut log_proposal = Vec::with_capacity(k);
    for _ in 0..k {
        let out = sample_action(policy, divnet, s, t_steps, rng)?;
        samples.push(out.action);
        log_proposal.push(out.log_likelihood);
    }
    Ok(ProposalBatch {
        samples,
        log_proposal,
        source: ProposalSource::Policy,
    })
}

/// Unnormalized log importance weight of one proposal draw against the
/// conditional target `exp(Q/alpha) N(a_0 | a_t/(1-t), (t/(1-t))^2 I)`.
///
/// For the Gaussian proposal the Gaussian factor cancels and only `Q/alpha`
/// remains; for the policy proposal it does not, so the factor is added and
/// the proposal's own log-density subtracted. The partition constant cancels
/// in both the SNIS normalization and the ESS.
pub fn conditional_log_weight(
    q_value: f64,
    alpha: f64,
    source: ProposalSource,
    a_0: &[f64],
    a_t: &[f64],
    t: f64,
    log_proposal: f64,
) -> f64 {
    assert!(alpha > 0.0, "temperature must be positive");
    match source {
        ProposalSource::Gaussian => q_value / alpha,
        ProposalSource::Policy => {
            let mean: Vec<f64> = a_t.iter().map(|x| x / (1.0 - t)).collect();
            let std = t / (1.0 - t);
            q_value / alpha + stats::isotropic_normal_logpdf(a_0, &mean, std) - log_proposal
        }
    }
}

/// Normalizes the log-weights and forms the SNIS velocity
/// `sum_i w_i (a_t - a_0^i)/t` together with the Kish ESS.
pub fn snis_estimate(
    batch: &ProposalBatch,
    log_weights: &[f64],
    a_t: &[f64],
    t: f64,
) -> Result<SnisResult> {
    assert_eq!(batch.samples.len(), log_weights.len(), "weight count mismatch");
    assert!(!batch.samples.is_empty(), "empty proposal batch");
    assert!(t > 0.0, "t must be positive");

    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let raw: Vec<f64> = log_weights.iter().map(|lw| (lw - m).exp()).collect();
    let sum: f64 = raw.iter().sum();
    let normalized_weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();

    let dim = a_t.len();
    let mut velocity = vec![0.0; dim];
    for (w, a0) in normalized_weights.iter().zip(&batch.samples) {
        for j in 0..dim {
            velocity[j] += w * (a_t[j] - a0[j]) / t;
        }
    }
    let ess = 1.0 / normalized_weights.iter().map(|w| w * w).sum::<f64>();
    Ok(SnisResult {
        velocity,
        ess,
        normalized_weights,
    })
}

/// Convex combination of two SNIS estimates with weights
/// `ESS_k / (ESS_1 + ESS_2)`.
pub fn combined_velocity(r1: &SnisResult, r2: &SnisResult) -> VelocityEstimate {
    assert_eq!(r1.velocity.len(), r2.velocity.len(), "velocity dim mismatch");
    let total = r1.ess + r2.ess;
    let w1 = r1.ess / total;
    let w2 = r2.ess / total;
    let velocity = r1
        .velocity
        .iter()
        .zip(&r2.velocity)
        .map(|(a, b)| w1 * a + w2 * b)
        .collect();
    VelocityEstimate {
        velocity,
        component_ess: [r1.ess, r2.ess],
        combination_weights: [w1, w2],
    }
}

fn single_estimate(result: SnisResult, source: ProposalSource) -> VelocityEstimate {
    let (ess, weights) = match source {
        ProposalSource::Policy => ([result.ess, 0.0], [1.0, 0.0]),
        ProposalSource::Gaussian => ([0.0, result.ess], [0.0, 1.0]),
    };
    VelocityEstimate {
        velocity: result.velocity,
        component_ess: ess,
        combination_weights: weights,
    }
}

/// Full adaptive estimate at `(s, a_t, t)`: runs the policy proposal with
/// `k1` samples and the Gaussian proposal with `k2` samples (skipping either
/// when its budget is 0), computes weights against the Boltzmann conditional,
/// and combines by ESS. Importance weights and likelihoods are treated as
/// constants; nothing here carries gradients.
#[allow(clippy::too_many_arguments)]
pub fn estimate_instantaneous_velocity<R: Rng + ?Sized>(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    q: &dyn QFunction,
    s: &[f64],
    a_t: &[f64],
    t: f64,
    alpha: f64,
    k1: usize,
    k2: usize,
    t_steps: usize,
    rng: &mut R,
) -> Result<VelocityEstimate> {
    assert!(k1 + k2 >= 1, "need at least one proposal sample");
    assert!(alpha > 0.0, "temperature must be positive");

    let weigh = |batch: &ProposalBatch| -> Vec<f64> {
        batch
            .samples
            .iter()
            .zip(&batch.log_proposal)
            .map(|(a0, &lp)| {
                conditional_log_weight(q.q_value(s, a0), alpha, batch.source, a0, a_t, t, lp)
            })
            .collect()
    };

    let policy_result = if k1 > 0 {
        let batch = policy_proposal(policy, divnet, s, k1, t_steps, rng)?;
        let lw = weigh(&batch);
        Some(snis_estimate(&batch, &lw, a_t, t)?)
    } else {
        None
    };
    let gaussian_result = if k2 > 0 {
        let batch = gaussian_proposal(a_t, t, k2, rng);
        let lw = weigh(&batch);
        Some(snis_estimate(&batch, &lw, a_t, t)?)
    } else {
        None
    };

    match (policy_result, gaussian_result) {
        (Some(r1), Some(r2)) => Ok(combined_velocity(&r1, &r2)),
        (Some(r1), None) => Ok(single_estimate(r1, ProposalSource::Policy)),
        (None, Some(r2)) => Ok(single_estimate(r2, ProposalSource::Gaussian)),
        (None, None) => unreachable!("k1 + k2 >= 1"),
    }
}
