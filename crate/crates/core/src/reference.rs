//! Closed-form baselines and fine-grained integrators used by diagnostics,
//! the self-check suite, and the toy pipeline.
//!
//! Three families live here:
//!
//! - the analytic Gaussian flow (prior = target = standard normal under the
//!   linear schedule), whose velocity, average velocity and average
//!   divergence all have closed forms, plus supervised trainers that fit
//!   the policy/divergence nets to it;
//! - the linear-Gaussian Boltzmann oracle: a quadratic Q whose tempered
//!   target is Gaussian, giving closed-form marginal velocities and an
//!   exact "ideal policy" proposal for SNIS diagnostics;
//! - a fine-grained Euler likelihood integrator with exact Jacobian traces,
//!   and an MMD statistic for distribution comparisons.

use rand::Rng;

use crate::diffcore::{Activation, AdamState};
use crate::divnet::{divnet_update, AvgDivergenceNet, ProbeKind, VelocityField};
use crate::error::Result;
use crate::meanflow::{
    policy_update, sample_time_pair, AvgVelocityNet, MeanFlowSample, TimePairConfig,
};
use crate::stats;
use crate::velest::{
    combined_velocity, conditional_log_weight, gaussian_proposal, snis_estimate, ProposalBatch,
    ProposalSource, QFunction, SnisResult,
};

// ---------------------------------------------------------------------------
// Analytic Gaussian flow (standard normal to standard normal, linear path).
// ---------------------------------------------------------------------------

/// `c_t^2 = (1-t)^2 + t^2`, the marginal variance scale of the path.
pub fn gaussian_flow_c2(t: f64) -> f64 {
    (1.0 - t) * (1.0 - t) + t * t
}

/// Marginal instantaneous velocity `v(x, t) = (2t - 1)/c_t^2 x`.
pub fn gaussian_flow_inst_velocity(x: &[f64], t: f64) -> Vec<f64> {
    let scale = (2.0 * t - 1.0) / gaussian_flow_c2(t);
    x.iter().map(|v| scale * v).collect()
}

/// Average velocity over `[r, t]`: `x (1 - c_r/c_t) / (t - r)` for `r < t`
/// (flow trajectories scale with `c_tau`).
pub fn gaussian_flow_avg_velocity(x: &[f64], r: f64, t: f64) -> Vec<f64> {
    if r == t {
        return gaussian_flow_inst_velocity(x, t);
    }
    let scale = (1.0 - (gaussian_flow_c2(r) / gaussian_flow_c2(t)).sqrt()) / (t - r);
    x.iter().map(|v| scale * v).collect()
}

/// Average divergence over `[r, t]` in `dim` dimensions:
/// `(dim/2) (ln c_t^2 - ln c_r^2) / (t - r)`.
pub fn gaussian_flow_avg_divergence(dim: usize, r: f64, t: f64) -> f64 {
    if r == t {
        return dim as f64 * (2.0 * t - 1.0) / gaussian_flow_c2(t);
    }
    dim as f64 / 2.0 * (gaussian_flow_c2(t).ln() - gaussian_flow_c2(r).ln()) / (t - r)
}

/// Budget for the supervised Gaussian-flow fits. The learning rate decays
/// linearly to `final_learning_rate` over the second half of training to
/// quench the steady-state jitter left by the high-variance conditional
/// targets.
#[derive(Debug, Clone)]
pub struct FlowFitConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub time_pairs: TimePairConfig,
    pub n_probes: usize,
}

impl Default for FlowFitConfig {
    fn default() -> Self {
        Self {
            steps: 4000,
            batch_size: 128,
            learning_rate: 1e-3,
            final_learning_rate: 1e-4,
            hidden_widths: vec![64, 64],
            activation: Activation::Gelu,
            time_pairs: TimePairConfig::default(),
            n_probes: 2,
        }
    }
}

impl FlowFitConfig {
    fn lr_at(&self, step: usize) -> f64 {
        let half = self.steps / 2;
        if step < half {
            self.learning_rate
        } else {
            let frac = (step - half) as f64 / (self.steps - half).max(1) as f64;
            self.learning_rate + frac * (self.final_learning_rate - self.learning_rate)
        }
    }
}

/// Fits the average-velocity net to the analytic flow with conditional
/// velocity targets `v = a_1 - a_0` (both endpoints standard normal). The
/// state is empty: the flow is unconditional.
pub fn train_gaussian_flow_policy<R: Rng + ?Sized>(
    dim: usize,
    config: &FlowFitConfig,
    seed: u64,
    rng: &mut R,
) -> Result<AvgVelocityNet> {
    let mut net = AvgVelocityNet::new(0, dim, &config.hidden_widths, config.activation, seed);
    let mut opt = AdamState::new(&net.params, config.learning_rate);
    for step in 0..config.steps {
        opt.learning_rate = config.lr_at(step);
        let batch: Vec<MeanFlowSample> = (0..config.batch_size)
            .map(|_| {
                let a0 = stats::draw_standard_normal(rng, dim);
                let a1 = stats::draw_standard_normal(rng, dim);
                let tp = sample_time_pair(rng, &config.time_pairs);
                let a_t: Vec<f64> = a0
                    .iter()
                    .zip(&a1)
                    .map(|(x0, x1)| (1.0 - tp.t) * x0 + tp.t * x1)
                    .collect();
                let v_hat: Vec<f64> = a1.iter().zip(&a0).map(|(x1, x0)| x1 - x0).collect();
                MeanFlowSample {
                    state: Vec::new(),
                    a_t,
                    r: tp.r,
                    t: tp.t,
                    v_hat,
                }
            })
            .collect();
        policy_update(&mut net, &mut opt, &batch)?;
    }
    Ok(net)
}

/// Noiseless variant: regresses on the exact marginal velocity of the
/// analytic flow instead of the conditional one. Same loss path, clean
/// targets; used where tests need tight pointwise tolerances.
pub fn train_gaussian_flow_policy_exact<R: Rng + ?Sized>(
    dim: usize,
    config: &FlowFitConfig,
    seed: u64,
    rng: &mut R,
) -> Result<AvgVelocityNet> {
    let mut net = AvgVelocityNet::new(0, dim, &config.hidden_widths, config.activation, seed);
    let mut opt = AdamState::new(&net.params, config.learning_rate);
    for step in 0..config.steps {
        opt.learning_rate = config.lr_at(step);
        let batch: Vec<MeanFlowSample> = (0..config.batch_size)
            .map(|_| {
                let a0 = stats::draw_standard_normal(rng, dim);
                let a1 = stats::draw_standard_normal(rng, dim);
                let tp = sample_time_pair(rng, &config.time_pairs);
                let a_t: Vec<f64> = a0
                    .iter()
                    .zip(&a1)
                    .map(|(x0, x1)| (1.0 - tp.t) * x0 + tp.t * x1)
                    .collect();
                let v_hat = gaussian_flow_inst_velocity(&a_t, tp.t);
                MeanFlowSample {
                    state: Vec::new(),
                    a_t,
                    r: tp.r,
                    t: tp.t,
                    v_hat,
                }
            })
            .collect();
        policy_update(&mut net, &mut opt, &batch)?;
    }
    Ok(net)
}

/// Fits the average-divergence net against Hutchinson estimates of the
/// given velocity field's instantaneous divergence along the analytic path.
pub fn train_gaussian_flow_divnet<V: VelocityField + ?Sized, R: Rng + ?Sized>(
    field: &V,
    config: &FlowFitConfig,
    probe_kind: ProbeKind,
    seed: u64,
    rng: &mut R,
) -> Result<AvgDivergenceNet> {
    let dim = field.action_dim();
    let mut net = AvgDivergenceNet::new(0, dim, &config.hidden_widths, config.activation, seed);
    let mut opt = AdamState::new(&net.params, config.learning_rate);
    for step in 0..config.steps {
        opt.learning_rate = config.lr_at(step);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..config.batch_size)
            .map(|_| (Vec::new(), stats::draw_standard_normal(rng, dim)))
            .collect();
        divnet_update(
            &mut net,
            &mut opt,
            field,
            &batch,
            config.n_probes,
            probe_kind,
            &config.time_pairs,
            rng,
        )?;
    }
    Ok(net)
}

/// The closed-form instantaneous velocity field of the analytic Gaussian
/// flow, `v(a, t) = (2t - 1)/c_t^2 a`, as a [`VelocityField`].
#[derive(Debug, Clone, Copy)]
pub struct GaussianFlowField {
    pub dim: usize,
}

impl VelocityField for GaussianFlowField {
    fn action_dim(&self) -> usize {
        self.dim
    }
    fn velocity(&self, _s: &[f64], a: &[f64], t: f64) -> Vec<f64> {
        gaussian_flow_inst_velocity(a, t)
    }
    fn velocity_jvp(&self, _s: &[f64], a: &[f64], t: f64, a_tangent: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            gaussian_flow_inst_velocity(a, t),
            gaussian_flow_inst_velocity(a_tangent, t),
        )
    }
}

// ---------------------------------------------------------------------------
// Linear velocity fields (exact Jacobian traces for the trace oracle).
// ---------------------------------------------------------------------------

/// `v(s, a, t) = A a`, time- and state-independent.
#[derive(Debug, Clone)]
pub struct LinearVelocityField {
    pub dim: usize,
    /// Row-major `dim x dim`.
    pub matrix: Vec<f64>,
}

impl LinearVelocityField {
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.matrix[i * self.dim + i]).sum()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.matrix[i * self.dim + j] * x[j])
                    .sum()
            })
            .collect()
    }
}

impl VelocityField for LinearVelocityField {
    fn action_dim(&self) -> usize {
        self.dim
    }
    fn velocity(&self, _s: &[f64], a: &[f64], _t: f64) -> Vec<f64> {
        self.apply(a)
    }
    fn velocity_jvp(&self, _s: &[f64], a: &[f64], _t: f64, a_tangent: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.apply(a), self.apply(a_tangent))
    }
}

// ---------------------------------------------------------------------------
// Linear-Gaussian Boltzmann oracle.
// ---------------------------------------------------------------------------

/// Quadratic soft value `Q(a) = -||a - mu||^2 / (2 sigma^2)`; the Boltzmann
/// target at temperature `alpha` is `N(mu, alpha sigma^2 I)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianOracle {
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub alpha: f64,
}

impl LinearGaussianOracle {
    pub fn target_std(&self) -> f64 {
        (self.alpha * self.sigma2).sqrt()
    }

    /// Marginal variance scale of the path toward `N(mu, s^2 I)`:
    /// `c_t^2 = (1-t)^2 s^2 + t^2`.
    pub fn path_c2(&self, t: f64) -> f64 {
        let s2 = self.alpha * self.sigma2;
        (1.0 - t) * (1.0 - t) * s2 + t * t
    }

    pub fn path_marginal_sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Vec<f64> {
        let c = self.path_c2(t).sqrt();
        self.mu
            .iter()
            .map(|m| (1.0 - t) * m + c * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    }

    /// Closed-form marginal velocity of the path:
    /// `v(a_t, t) = -mu + (t - (1-t) s^2) / c_t^2 (a_t - (1-t) mu)`.
    pub fn marginal_velocity(&self, a_t: &[f64], t: f64) -> Vec<f64> {
        let s2 = self.alpha * self.sigma2;
        let scale = (t - (1.0 - t) * s2) / self.path_c2(t);
        a_t.iter()
            .zip(&self.mu)
            .map(|(x, m)| -m + scale * (x - (1.0 - t) * m))
            .collect()
    }

    /// Exact draw from the Boltzmann target (the ideal trained policy).
    pub fn boltzmann_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let std = self.target_std();
        self.mu
            .iter()
            .map(|m| m + std * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    }

    pub fn boltzmann_logpdf(&self, a: &[f64]) -> f64 {
        stats::isotropic_normal_logpdf(a, &self.mu, self.target_std())
    }

    /// An exact-policy proposal batch for SNIS diagnostics.
    pub fn ideal_policy_proposal<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> ProposalBatch {
        let samples: Vec<Vec<f64>> = (0..k).map(|_| self.boltzmann_sample(rng)).collect();
        let log_proposal = samples.iter().map(|a| self.boltzmann_logpdf(a)).collect();
        ProposalBatch {
            samples,
            log_proposal,
            source: ProposalSource::Policy,
        }
    }
}

impl QFunction for LinearGaussianOracle {
    fn q_value(&self, _s: &[f64], a: &[f64]) -> f64 {
        let sq: f64 = a
            .iter()
            .zip(&self.mu)
            .map(|(x, m)| (x - m) * (x - m))
            .sum();
        -sq / (2.0 * self.sigma2)
    }
}

/// One combined SNIS estimate on the oracle at `(a_t, t)`, using the exact
/// Boltzmann policy proposal with `k1` samples and the Gaussian conditional
/// proposal with `k2`.
pub fn oracle_velocity_estimate<R: Rng + ?Sized>(
    oracle: &LinearGaussianOracle,
    a_t: &[f64],
    t: f64,
    k1: usize,
    k2: usize,
    rng: &mut R,
) -> Result<(SnisResult, SnisResult, Vec<f64>)> {
    let weigh = |batch: &ProposalBatch| -> Vec<f64> {
        batch
            .samples
            .iter()
            .zip(&batch.log_proposal)
            .map(|(a0, &lp)| {
                conditional_log_weight(
                    oracle.q_value(&[], a0),
                    oracle.alpha,
                    batch.source,
                    a0,
                    a_t,
                    t,
                    lp,
                )
            })
            .collect()
    };
    let policy_batch = oracle.ideal_policy_proposal(k1, rng);
    let r1 = snis_estimate(&policy_batch, &weigh(&policy_batch), a_t, t)?;
    let gaussian_batch = gaussian_proposal(a_t, t, k2, rng);
    let r2 = snis_estimate(&gaussian_batch, &weigh(&gaussian_batch), a_t, t)?;
    let combined = combined_velocity(&r1, &r2);
    Ok((r1, r2, combined.velocity))
}

// ---------------------------------------------------------------------------
// Fine-grained Euler likelihood and MMD.
// ---------------------------------------------------------------------------

/// Integrates `da/dt = v(s, a, t)` backward from `a_1` over `n_steps` Euler
/// steps, accumulating the exact instantaneous divergence (one JVP per
/// action coordinate). Returns the endpoint and its log-likelihood under
/// the standard-normal prior plus the divergence integral.
pub fn euler_log_likelihood<V: VelocityField + ?Sized>(
    field: &V,
    s: &[f64],
    a1: &[f64],
    n_steps: usize,
) -> (Vec<f64>, f64) {
    assert!(n_steps >= 1);
    let dim = field.action_dim();
    let h = 1.0 / n_steps as f64;
    let mut a = a1.to_vec();
    let mut logp = stats::standard_normal_logpdf(a1);
    for i in (1..=n_steps).rev() {
        let t = i as f64 / n_steps as f64;
        let mut divergence = 0.0;
        let mut velocity = Vec::new();
        for j in 0..dim {
            let mut basis = vec![0.0; dim];
            basis[j] = 1.0;
            let (v, jv) = field.velocity_jvp(s, &a, t, &basis);
            divergence += jv[j];
            if j == 0 {
                velocity = v;
            }
        }
        if dim == 0 {
            velocity = field.velocity(s, &a, t);
        }
        for (aj, vj) in a.iter_mut().zip(&velocity) {
            *aj -= h * vj;
        }
        logp += h * divergence;
    }
    (a, logp)
}

/// Unbiased squared maximum mean discrepancy with the Gaussian kernel
/// `k(a, b) = exp(-||a - b||^2 / (2 bw^2))`, returned as `sqrt(max(0, .))`.
pub fn mmd_gaussian(x: &[Vec<f64>], y: &[Vec<f64>], bandwidth: f64) -> f64 {
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let kernel = |a: &[f64], b: &[f64]| -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        (-gamma * d2).exp()
    };
    let self_term = |z: &[Vec<f64>]| -> f64 {
        let n = z.len();
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += kernel(&z[i], &z[j]);
            }
        }
        2.0 * sum / (n as f64 * (n as f64 - 1.0))
    };
    let mut cross = 0.0;
    for xi in x {
        for yj in y {
            cross += kernel(xi, yj);
        }
    }
    cross /= (x.len() * y.len()) as f64;
    let mmd2 = self_term(x) + self_term(y) - 2.0 * cross;
    mmd2.max(0.0).sqrt()
}
