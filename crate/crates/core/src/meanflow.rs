//! MeanFlow policy: the average-velocity network `u(s, a_t, r, t)`, few-step
//! action sampling with likelihood accumulation, time-pair sampling, and the
//! self-consistent regression target / loss.
//!
//! The flow runs from a standard-normal prior at `t = 1` to the action
//! distribution at `t = 0` along the linear schedule
//! `a_t = (1 - t) a_0 + t a_1`. Actions are not squashed here; callers clip
//! to the action box at the environment boundary, and likelihoods always
//! refer to the pre-clip action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    adam_step, mlp_forward, mlp_init, mlp_jvp, mlp_vjp_accumulate, Activation, AdamState,
    DualVector, MlpSpec, ParamGradient, ParamSet,
};
use crate::divnet::AvgDivergenceNet;
use crate::error::{Error, Result};
use crate::stats;

/// The policy network `u(s, a_t, r, t)`; input is the raw concatenation
/// `[s, a_t, r, t]` and the output has action dimension.
#[derive(Debug, Clone)]
pub struct AvgVelocityNet {
    pub state_dim: usize,
    pub action_dim: usize,
    pub params: ParamSet,
}

impl AvgVelocityNet {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden_widths: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Self {
        let spec = MlpSpec::new(
            state_dim + action_dim + 2,
            hidden_widths.to_vec(),
            action_dim,
            activation,
        );
        Self {
            state_dim,
            action_dim,
            params: mlp_init(&spec, seed),
        }
    }

    pub fn from_params(state_dim: usize, action_dim: usize, params: ParamSet) -> Self {
        assert_eq!(params.input_dim(), state_dim + action_dim + 2, "input dim mismatch");
        assert_eq!(params.output_dim(), action_dim, "output dim mismatch");
        Self {
            state_dim,
            action_dim,
            params,
        }
    }

    pub(crate) fn net_input(&self, s: &[f64], a: &[f64], r: f64, t: f64) -> Vec<f64> {
        assert_eq!(s.len(), self.state_dim, "state dimension mismatch");
        assert_eq!(a.len(), self.action_dim, "action dimension mismatch");
        let mut input = Vec::with_capacity(s.len() + a.len() + 2);
        input.extend_from_slice(s);
        input.extend_from_slice(a);
        input.push(r);
        input.push(t);
        input
    }
}

/// An interval `[r, t]` of flow time, with `0 <= r <= t <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePair {
    pub r: f64,
    pub t: f64,
}

/// How training-time `(r, t)` pairs are drawn: two independent U(0,1) draws
/// ordered as (min, max), with probability `p_equal` collapsed to `r = t`,
/// and both endpoints clipped into `[t_min, t_max]` to stay away from the
/// `1/t` and `1/(1-t)` singularities of the conditional decomposition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimePairConfig {
    pub p_equal: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for TimePairConfig {
    fn default() -> Self {
        Self {
            p_equal: 0.5,
            t_min: 1e-3,
            t_max: 1.0 - 1e-3,
        }
    }
}

pub fn sample_time_pair<R: Rng + ?Sized>(rng: &mut R, config: &TimePairConfig) -> TimePair {
    let clip = |x: f64| x.clamp(config.t_min, config.t_max);
    if rng.random::<f64>() < config.p_equal {
        let t = clip(rng.random::<f64>());
        TimePair { r: t, t }
    } else {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let t = clip(u1.max(u2));
        let r = clip(u1.min(u2)).min(t);
        TimePair { r, t }
    }
}

/// One sampled action together with its accumulated log-likelihood and the
/// visited trajectory `(a_{t_i}, t_i)` from `t = 1` down to `t = 0`.
#[derive(Debug, Clone)]
pub struct SampledAction {
    pub action: Vec<f64>,
    pub log_likelihood: f64,
    pub trajectory: Vec<(Vec<f64>, f64)>,
}

/// `u(s, a_t, r, t)`.
pub fn avg_velocity(net: &AvgVelocityNet, s: &[f64], a_t: &[f64], r: f64, t: f64) -> Vec<f64> {
    mlp_forward(&net.params, &net.net_input(s, a_t, r, t))
}

/// Instantaneous velocity `v(s, a, t) = u(s, a, t, t)`.
pub fn inst_velocity(net: &AvgVelocityNet, s: &[f64], a: &[f64], t: f64) -> Vec<f64> {
    avg_velocity(net, s, a, t, t)
}

/// Value and directional derivative of `u` at `(s, a_t, r, t)` along the
/// tangent `(a: a_tangent, r: r_tangent, t: t_tangent)` (state held fixed).
pub fn avg_velocity_jvp(
    net: &AvgVelocityNet,
    s: &[f64],
    a_t: &[f64],
    r: f64,
    t: f64,
    a_tangent: &[f64],
    r_tangent: f64,
    t_tangent: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a_tangent.len(), net.action_dim, "tangent dimension mismatch");
    let input = net.net_input(s, a_t, r, t);
    let mut tangent = vec![0.0; input.len()];
    tangent[s.len()..s.len() + a_tangent.len()].copy_from_slice(a_tangent);
    tangent[input.len() - 2] = r_tangent;
    tangent[input.len() - 1] = t_tangent;
    let out = mlp_jvp(&net.params, &DualVector::new(input, tangent));
    (out.value, out.tangent)
}

/// Few-step action sampling with likelihood accumulation.
///
/// Draws `a_1 ~ N(0, I)`, then for `i = T..1` applies
/// `a_{t_{i-1}} = a_{t_i} - (1/T) u(s, a_{t_i}, t_{i-1}, t_i)` on the grid
/// `t_i = i/T` while accumulating `(1/T) delta(s, a_{t_i}, t_{i-1}, t_i)`
/// on top of the prior log-density.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    s: &[f64],
    t_steps: usize,
    rng: &mut R,
) -> Result<SampledAction> {
    let a1 = stats::draw_standard_normal(rng, policy.action_dim);
    sample_action_from(policy, divnet, s, t_steps, a1)
}

/// Deterministic remainder of [`sample_action`] given the prior draw `a_1`.
pub fn sample_action_from(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    s: &[f64],
    t_steps: usize,
    a1: Vec<f64>,
) -> Result<SampledAction> {
    assert!(t_steps >= 1, "need at least one sampling step");
    assert_eq!(policy.action_dim, divnet.action_dim, "policy/divnet action dim mismatch");
    assert_eq!(a1.len(), policy.action_dim, "prior draw dimension mismatch");
    let inv_t = 1.0 / t_steps as f64;

    let mut a = a1;
    let mut log_likelihood = stats::standard_normal_logpdf(&a);
    let mut trajectory = Vec::with_capacity(t_steps + 1);
    trajectory.push((a.clone(), 1.0));

    for i in (1..=t_steps).rev() {
        let t_i = i as f64 / t_steps as f64;
        let t_prev = (i - 1) as f64 / t_steps as f64;
        let u = avg_velocity(policy, s, &a, t_prev, t_i);
        let delta = divnet.avg_divergence(s, &a, t_prev, t_i);
        for (aj, uj) in a.iter_mut().zip(&u) {
            *aj -= inv_t * uj;
        }
        log_likelihood += inv_t * delta;
        if !a.iter().all(|v| v.is_finite()) || !log_likelihood.is_finite() {
            return Err(Error::NonFiniteAction { step_index: i });
        }
        trajectory.push((a.clone(), t_prev));
    }

    Ok(SampledAction {
        action: a,
        log_likelihood,
        trajectory,
    })
}

/// The self-consistent regression target
/// `u_tgt = v_hat - (t - r) (v_hat . da u + dt u)`, with the directional
/// derivative computed by a single JVP along `(a: v_hat, r: 0, t: 1)`.
///
/// The caller treats the result as a constant (stop-gradient contract): no
/// gradient flows through the target.
pub fn meanflow_target(
    net: &AvgVelocityNet,
    s: &[f64],
    a_t: &[f64],
    r: f64,
    t: f64,
    v_hat: &[f64],
) -> Vec<f64> {
    let (_, du) = avg_velocity_jvp(net, s, a_t, r, t, v_hat, 0.0, 1.0);
    v_hat
        .iter()
        .zip(&du)
        .map(|(v, d)| v - (t - r) * d)
        .collect()
}

/// One element of a policy regression batch.
#[derive(Debug, Clone)]
pub struct MeanFlowSample {
    pub state: Vec<f64>,
    pub a_t: Vec<f64>,
    pub r: f64,
    pub t: f64,
    pub v_hat: Vec<f64>,
}

/// Mean-squared-error regression of `u` onto the (stop-gradient) targets,
/// followed by one Adam step. Returns the pre-step loss; on a non-finite
/// loss the parameters are left untouched.
pub fn policy_update(
    net: &mut AvgVelocityNet,
    optimizer: &mut AdamState,
    batch: &[MeanFlowSample],
) -> Result<f64> {
    assert!(!batch.is_empty(), "empty batch");
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = ParamGradient::zeros(&net.params);
    let mut total = 0.0;

    for item in batch {
        // The JVP for the target also yields the prediction u(s, a_t, r, t).
        let (pred, du) =
            avg_velocity_jvp(net, &item.state, &item.a_t, item.r, item.t, &item.v_hat, 0.0, 1.0);
        let input = net.net_input(&item.state, &item.a_t, item.r, item.t);
        let mut cot = Vec::with_capacity(pred.len());
        for ((p, d), v) in pred.iter().zip(&du).zip(&item.v_hat) {
            let target = v - (item.t - item.r) * d;
            let resid = p - target;
            total += resid * resid;
            cot.push(2.0 * resid * inv_b);
        }
        mlp_vjp_accumulate(&net.params, &input, &cot, &mut grad);
    }

    let loss = total * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            context: "policy_update",
            loss,
        });
    }
    adam_step(optimizer, &mut net.params, &grad)?;
    Ok(loss)
}
