//! Average divergence network: a scalar net `delta(s, a_t, r, t)` that
//! approximates the time-averaged divergence of the instantaneous velocity
//! field, trained against Skilling–Hutchinson trace estimates. Accumulating
//! it along the sampling trajectory yields action log-likelihoods via the
//! instantaneous change-of-variable formula.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffcore::{
    adam_step, mlp_forward, mlp_init, mlp_jvp, mlp_vjp_accumulate, Activation, AdamState,
    DualVector, MlpSpec, ParamGradient, ParamSet,
};
use crate::error::{Error, Result};
use crate::meanflow::{sample_time_pair, AvgVelocityNet, TimePairConfig};
use crate::stats;

/// Scalar network over the raw concatenation `[s, a_t, r, t]`.
#[derive(Debug, Clone)]
pub struct AvgDivergenceNet {
    pub state_dim: usize,
    pub action_dim: usize,
    pub params: ParamSet,
}

impl AvgDivergenceNet {
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
            1,
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
        assert_eq!(params.output_dim(), 1, "divergence net output must be scalar");
        Self {
            state_dim,
            action_dim,
            params,
        }
    }

    fn net_input(&self, s: &[f64], a: &[f64], r: f64, t: f64) -> Vec<f64> {
        assert_eq!(s.len(), self.state_dim, "state dimension mismatch");
        assert_eq!(a.len(), self.action_dim, "action dimension mismatch");
        let mut input = Vec::with_capacity(s.len() + a.len() + 2);
        input.extend_from_slice(s);
        input.extend_from_slice(a);
        input.push(r);
        input.push(t);
        input
    }

    /// `delta(s, a_t, r, t)`.
    pub fn avg_divergence(&self, s: &[f64], a: &[f64], r: f64, t: f64) -> f64 {
        mlp_forward(&self.params, &self.net_input(s, a, r, t))[0]
    }

    /// Value and directional derivative along `(a: a_tangent, r: 0, t: t_tangent)`.
    fn jvp(
        &self,
        s: &[f64],
        a: &[f64],
        r: f64,
        t: f64,
        a_tangent: &[f64],
        t_tangent: f64,
    ) -> (f64, f64) {
        let input = self.net_input(s, a, r, t);
        let mut tangent = vec![0.0; input.len()];
        tangent[s.len()..s.len() + a_tangent.len()].copy_from_slice(a_tangent);
        let n = input.len();
        tangent[n - 1] = t_tangent;
        let out = mlp_jvp(&self.params, &DualVector::new(input, tangent));
        (out.value[0], out.tangent[0])
    }
}

/// A conditional velocity field `v(s, a, t)` that supports directional
/// derivatives in its action argument. Implemented by the policy network
/// (via `v = u(s, a, t, t)`) and by closed-form test fields.
pub trait VelocityField {
    fn action_dim(&self) -> usize;
    fn velocity(&self, s: &[f64], a: &[f64], t: f64) -> Vec<f64>;
    /// Returns `(v(s, a, t), dv/da . a_tangent)` with `t` held fixed.
    fn velocity_jvp(&self, s: &[f64], a: &[f64], t: f64, a_tangent: &[f64]) -> (Vec<f64>, Vec<f64>);
}

impl VelocityField for AvgVelocityNet {
    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn velocity(&self, s: &[f64], a: &[f64], t: f64) -> Vec<f64> {
        crate::meanflow::inst_velocity(self, s, a, t)
    }

    fn velocity_jvp(&self, s: &[f64], a: &[f64], t: f64, a_tangent: &[f64]) -> (Vec<f64>, Vec<f64>) {
        // Both time inputs sit at r = t and are held fixed: the divergence is
        // taken with respect to the action coordinates only.
        crate::meanflow::avg_velocity_jvp(self, s, a, t, t, a_tangent, 0.0, 0.0)
    }
}

/// An N-probe trace estimate.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub num_probes: usize,
}

/// Probe distribution for the trace estimator. Gaussian is the training
/// default; Rademacher has lower variance and supports exhaustive
/// enumeration on small dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Gaussian,
    Rademacher,
}

pub fn sample_probes<R: Rng + ?Sized>(
    rng: &mut R,
    kind: ProbeKind,
    n: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| match kind {
            ProbeKind::Gaussian => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            ProbeKind::Rademacher => (0..dim)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        })
        .collect()
}

/// All `2^dim` sign vectors; averaging the quadratic form over them equals
/// the exact Jacobian trace.
pub fn exhaustive_rademacher_probes(dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= 20, "exhaustive enumeration only for small dims");
    (0..1usize << dim)
        .map(|mask| {
            (0..dim)
                .map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// Skilling–Hutchinson estimate `(1/N) sum_i e_i^T (dv/da) e_i`, each
/// quadratic form via one forward-mode pass.
pub fn hutchinson_divergence<V: VelocityField + ?Sized>(
    field: &V,
    s: &[f64],
    a_t: &[f64],
    t: f64,
    probes: &[Vec<f64>],
) -> DivergenceEstimate {
    assert!(!probes.is_empty(), "need at least one probe");
    let mut total = 0.0;
    for eps in probes {
        assert_eq!(eps.len(), field.action_dim(), "probe dimension mismatch");
        let (_, jv) = field.velocity_jvp(s, a_t, t, eps);
        total += eps.iter().zip(&jv).map(|(e, j)| e * j).sum::<f64>();
    }
    DivergenceEstimate {
        value: total / probes.len() as f64,
        num_probes: probes.len(),
    }
}

/// Regression target `delta_tgt = div_hat - (t - r) (v . da delta + dt delta)`
/// with the directional derivative of `delta` computed by one JVP along
/// `(a: v(s, a_t, t), r: 0, t: 1)`, where `v` is the policy's instantaneous
/// velocity `u(s, a_t, t, t)`. Stop-gradient contract: the caller treats the
/// result as a constant.
pub fn divnet_target<V: VelocityField + ?Sized>(
    divnet: &AvgDivergenceNet,
    policy: &V,
    s: &[f64],
    a_t: &[f64],
    r: f64,
    t: f64,
    div_hat: f64,
) -> f64 {
    let v_inst = policy.velocity(s, a_t, t);
    let (_, ddelta) = divnet.jvp(s, a_t, r, t, &v_inst, 1.0);
    div_hat - (t - r) * ddelta
}

/// One training step of the average divergence network on a batch of
/// `(state, a_0)` pairs from the current policy: per element draws
/// `(r, t)`, fresh prior noise to form `a_t = (1-t) a_0 + t a_1`, and `N`
/// probes for the divergence estimate, then regresses `delta` onto the
/// stop-gradient targets with one Adam step.
#[allow(clippy::too_many_arguments)]
pub fn divnet_update<V: VelocityField + ?Sized, R: Rng + ?Sized>(
    divnet: &mut AvgDivergenceNet,
    optimizer: &mut AdamState,
    policy: &V,
    batch: &[(Vec<f64>, Vec<f64>)],
    n_probes: usize,
    probe_kind: ProbeKind,
    time_config: &TimePairConfig,
    rng: &mut R,
) -> Result<f64> {
    assert!(!batch.is_empty(), "empty batch");
    assert!(n_probes >= 1, "need at least one probe");
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = ParamGradient::zeros(&divnet.params);
    let mut total = 0.0;

    for (s, a0) in batch {
        let tp = sample_time_pair(rng, time_config);
        let a1 = stats::draw_standard_normal(rng, divnet.action_dim);
        let a_t: Vec<f64> = a0
            .iter()
            .zip(&a1)
            .map(|(x0, x1)| (1.0 - tp.t) * x0 + tp.t * x1)
            .collect();
        let probes = sample_probes(rng, probe_kind, n_probes, divnet.action_dim);
        let div_hat = hutchinson_divergence(policy, s, &a_t, tp.t, &probes).value;

        let v_inst = policy.velocity(s, &a_t, tp.t);
        let (pred, ddelta) = divnet.jvp(s, &a_t, tp.r, tp.t, &v_inst, 1.0);
        let target = div_hat - (tp.t - tp.r) * ddelta;
        let resid = pred - target;
        total += resid * resid;

        let input = divnet.net_input(s, &a_t, tp.r, tp.t);
        mlp_vjp_accumulate(&divnet.params, &input, &[2.0 * resid * inv_b], &mut grad);
    }

    let loss = total * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            context: "divnet_update",
            loss,
        });
    }
    adam_step(optimizer, &mut divnet.params, &grad)?;
    Ok(loss)
}

/// Recomputes the accumulated log-likelihood of a sampling trajectory:
/// `prior_logp + (1/T) sum_i delta(s, a_{t_i}, t_{i-1}, t_i)`. Pure.
pub fn trajectory_log_likelihood(
    divnet: &AvgDivergenceNet,
    s: &[f64],
    trajectory: &[(Vec<f64>, f64)],
    prior_logp: f64,
    t_steps: usize,
) -> f64 {
    assert_eq!(trajectory.len(), t_steps + 1, "trajectory length mismatch");
    let inv_t = 1.0 / t_steps as f64;
    let mut logp = prior_logp;
    for w in trajectory.windows(2) {
        let (a_ti, t_i) = &w[0];
        let t_prev = w[1].1;
        logp += inv_t * divnet.avg_divergence(s, a_ti, t_prev, *t_i);
    }
    logp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanflow::sample_action;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Linear velocity field `v(a) = A a` (state and time ignored).
    struct LinearTestField {
        dim: usize,
        matrix: Vec<f64>, // row-major dim x dim
    }

    impl VelocityField for LinearTestField {
        fn action_dim(&self) -> usize {
            self.dim
        }
        fn velocity(&self, _s: &[f64], a: &[f64], _t: f64) -> Vec<f64> {
            (0..self.dim)
                .map(|i| (0..self.dim).map(|j| self.matrix[i * self.dim + j] * a[j]).sum())
                .collect()
        }
        fn velocity_jvp(
            &self,
            s: &[f64],
            a: &[f64],
            t: f64,
            a_tangent: &[f64],
        ) -> (Vec<f64>, Vec<f64>) {
            (self.velocity(s, a, t), self.velocity(s, a_tangent, t))
        }
    }

    #[test]
    fn exhaustive_rademacher_recovers_diag_trace_exactly() {
        let field = LinearTestField {
            dim: 3,
            matrix: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
        };
        let probes = exhaustive_rademacher_probes(3);
        assert_eq!(probes.len(), 8);
        let est = hutchinson_divergence(&field, &[], &[0.5, -0.5, 0.2], 0.5, &probes);
        assert_eq!(est.value, 6.0);
    }

    #[test]
    fn exhaustive_rademacher_equals_trace_on_random_linear_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for dim in 1..=6 {
            let matrix: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let trace: f64 = (0..dim).map(|i| matrix[i * dim + i]).sum();
            let field = LinearTestField { dim, matrix };
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let est = hutchinson_divergence(&field, &[], &a, 0.3, &exhaustive_rademacher_probes(dim));
            assert!(
                (est.value - trace).abs() <= 1e-9,
                "dim {dim}: {} vs {trace}",
                est.value
            );
        }
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        struct ConstField;
        impl VelocityField for ConstField {
            fn action_dim(&self) -> usize {
                2
            }
            fn velocity(&self, _: &[f64], _: &[f64], _: f64) -> Vec<f64> {
                vec![3.0, -1.0]
            }
            fn velocity_jvp(&self, s: &[f64], a: &[f64], t: f64, _: &[f64]) -> (Vec<f64>, Vec<f64>) {
                (self.velocity(s, a, t), vec![0.0, 0.0])
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let probes = sample_probes(&mut rng, ProbeKind::Gaussian, 5, 2);
        let est = hutchinson_divergence(&ConstField, &[], &[0.0, 0.0], 0.5, &probes);
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn gaussian_probes_are_unbiased_for_linear_map() {
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let matrix: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace: f64 = (0..dim).map(|i| matrix[i * dim + i]).sum();
        let field = LinearTestField { dim, matrix };
        let n = 100_000;
        let a = vec![0.0; dim];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let probes = sample_probes(&mut rng, ProbeKind::Gaussian, 1, dim);
            values.push(hutchinson_divergence(&field, &[], &a, 0.5, &probes).value);
        }
        let mean = stats::mean(&values);
        let se = (stats::variance(&values) / n as f64).sqrt();
        assert!(
            (mean - trace).abs() <= 3.0 * se,
            "mean {mean} vs trace {trace} (se {se})"
        );
    }

    #[test]
    fn target_is_div_hat_when_r_equals_t() {
        let policy = AvgVelocityNet::new(2, 2, &[8], Activation::Gelu, 1);
        let divnet = AvgDivergenceNet::new(2, 2, &[8], Activation::Gelu, 2);
        let tgt = divnet_target(&divnet, &policy, &[0.1, 0.2], &[0.3, 0.4], 0.6, 0.6, 1.234);
        assert_eq!(tgt, 1.234);
    }

    #[test]
    fn target_is_div_hat_for_constant_divnet() {
        let policy = AvgVelocityNet::new(1, 1, &[8], Activation::Mish, 3);
        let mut divnet = AvgDivergenceNet::new(1, 1, &[8], Activation::Mish, 4);
        for l in &mut divnet.params.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let n_layers = divnet.params.layers.len();
        divnet.params.layers[n_layers - 1].bias[0] = 0.9;
        let tgt = divnet_target(&divnet, &policy, &[0.5], &[0.2], 0.1, 0.8, -0.5);
        assert_eq!(tgt, -0.5);
    }

    #[test]
    fn target_jvp_term_matches_finite_differences() {
        let policy = AvgVelocityNet::new(1, 2, &[6, 6], Activation::Gelu, 5);
        let divnet = AvgDivergenceNet::new(1, 2, &[6, 6], Activation::Gelu, 6);
        let s = [0.3];
        let a_t = [0.2, -0.8];
        let (r, t) = (0.25, 0.85);
        let v = crate::meanflow::inst_velocity(&policy, &s, &a_t, t);
        let (_, ddelta) = divnet.jvp(&s, &a_t, r, t, &v, 1.0);
        let h = 1e-5;
        let shift = |sign: f64| {
            let a: Vec<f64> = a_t.iter().zip(&v).map(|(x, vj)| x + sign * h * vj).collect();
            divnet.avg_divergence(&s, &a, r, t + sign * h)
        };
        let fd = (shift(1.0) - shift(-1.0)) / (2.0 * h);
        let rel = (ddelta - fd).abs() / fd.abs().max(1e-3);
        assert!(rel <= 1e-5, "jvp {ddelta} vs fd {fd}");
    }

    #[test]
    fn constant_policy_drives_divnet_toward_zero() {
        // A constant velocity field has zero divergence everywhere, so all
        // targets are ~0 and the regression loss must shrink toward 0.
        let mut policy = AvgVelocityNet::new(1, 1, &[8], Activation::Relu, 7);
        for l in &mut policy.params.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let mut divnet = AvgDivergenceNet::new(1, 1, &[8], Activation::Gelu, 8);
        let mut opt = AdamState::new(&divnet.params, 3e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..16)
            .map(|_| (vec![0.0], stats::draw_standard_normal(&mut rng, 1)))
            .collect();
        let tp = TimePairConfig::default();
        let mut tail = Vec::new();
        for k in 0..1500 {
            let loss = divnet_update(
                &mut divnet,
                &mut opt,
                &policy,
                &batch,
                2,
                ProbeKind::Gaussian,
                &tp,
                &mut rng,
            )
            .unwrap();
            if k >= 1450 {
                tail.push(loss);
            }
        }
        let tail_mean = stats::mean(&tail);
        assert!(tail_mean < 1e-3, "loss did not approach zero: {tail_mean}");
    }

    #[test]
    fn divnet_loss_decreases_on_fixed_data() {
        let policy = AvgVelocityNet::new(2, 2, &[8, 8], Activation::Gelu, 9);
        let mut divnet = AvgDivergenceNet::new(2, 2, &[16], Activation::Gelu, 10);
        let mut opt = AdamState::new(&divnet.params, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..32)
            .map(|_| {
                (
                    stats::draw_standard_normal(&mut rng, 2),
                    stats::draw_standard_normal(&mut rng, 2),
                )
            })
            .collect();
        let tp = TimePairConfig::default();
        let losses: Vec<f64> = (0..500)
            .map(|_| {
                divnet_update(
                    &mut divnet,
                    &mut opt,
                    &policy,
                    &batch,
                    2,
                    ProbeKind::Gaussian,
                    &tp,
                    &mut rng,
                )
                .unwrap()
            })
            .collect();
        let window = 50;
        let head: f64 = losses[..window].iter().sum::<f64>() / window as f64;
        let tail: f64 = losses[losses.len() - window..].iter().sum::<f64>() / window as f64;
        assert!(tail < head, "head {head} tail {tail}");
    }

    #[test]
    fn zero_divnet_leaves_prior_logp_unchanged() {
        let mut divnet = AvgDivergenceNet::new(1, 1, &[8], Activation::Gelu, 15);
        for l in &mut divnet.params.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let traj = vec![(vec![0.5], 1.0), (vec![0.4], 0.5), (vec![0.3], 0.0)];
        let out = trajectory_log_likelihood(&divnet, &[0.0], &traj, -1.7, 2);
        assert_eq!(out, -1.7);
    }

    #[test]
    fn trajectory_likelihood_is_additive_over_splits() {
        let policy = AvgVelocityNet::new(2, 2, &[8], Activation::Gelu, 16);
        let divnet = AvgDivergenceNet::new(2, 2, &[8], Activation::Gelu, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = [0.4, -0.2];
        let t_steps = 4;
        let out = sample_action(&policy, &divnet, &s, t_steps, &mut rng).unwrap();
        let prior = stats::standard_normal_logpdf(&out.trajectory[0].0);
        let total = trajectory_log_likelihood(&divnet, &s, &out.trajectory, prior, t_steps);

        for split in 1..t_steps {
            // Sum the per-step integrals of the two segments; the (1/T)
            // coefficient refers to the full grid in both.
            let inv_t = 1.0 / t_steps as f64;
            let seg = |lo: usize, hi: usize| -> f64 {
                out.trajectory[lo..=hi]
                    .windows(2)
                    .map(|w| inv_t * divnet.avg_divergence(&s, &w[0].0, w[1].1, w[0].1))
                    .sum()
            };
            let rebuilt = prior + seg(0, split) + seg(split, t_steps);
            assert!((rebuilt - total).abs() <= 1e-12);
        }
    }

    #[test]
    fn trajectory_likelihood_matches_sample_action_accumulator() {
        let policy = AvgVelocityNet::new(2, 2, &[8, 8], Activation::Mish, 18);
        let divnet = AvgDivergenceNet::new(2, 2, &[8, 8], Activation::Mish, 19);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let s = [1.0, -1.0];
        let out = sample_action(&policy, &divnet, &s, 3, &mut rng).unwrap();
        let prior = stats::standard_normal_logpdf(&out.trajectory[0].0);
        let recomputed = trajectory_log_likelihood(&divnet, &s, &out.trajectory, prior, 3);
        assert!((recomputed - out.log_likelihood).abs() <= 1e-12);
    }
}
