//! Categorical distributional soft critic (C51-style).
//!
//! The return distribution lives on a uniform atom grid; the scalar Q value
//! is its mean. Soft Bellman targets shift the atoms by
//! `r + gamma (1 - done) (z_j - alpha log pi(a'|s'))` and project back onto
//! the grid, so the projected mean reproduces the scalar soft target. The
//! critic loss is the cross-entropy between target and predicted
//! distributions.

use rand::Rng;

use crate::diffcore::{
    adam_step, mlp_forward, mlp_init, mlp_vjp_accumulate, Activation, AdamState, MlpSpec,
    ParamGradient, ParamSet,
};
use crate::divnet::AvgDivergenceNet;
use crate::error::{Error, Result};
use crate::meanflow::{sample_action, AvgVelocityNet};
use crate::train::Transition;
use crate::velest::QFunction;

/// Logits network over `[s, a]` with one output per atom, plus the grid.
#[derive(Debug, Clone)]
pub struct CategoricalCritic {
    pub state_dim: usize,
    pub action_dim: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub atoms: Vec<f64>,
    pub params: ParamSet,
}

/// Probabilities over the atom grid; non-negative, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDistribution {
    pub probabilities: Vec<f64>,
}

/// Polyak-tracked copy of the online parameters.
#[derive(Debug, Clone)]
pub struct TargetCriticState {
    pub params: ParamSet,
    pub tau: f64,
}

pub fn uniform_atoms(m: usize, v_min: f64, v_max: f64) -> Vec<f64> {
    assert!(m >= 2, "need at least two atoms");
    assert!(v_min < v_max, "atom range must be non-empty");
    let spacing = (v_max - v_min) / (m - 1) as f64;
    (0..m).map(|i| v_min + i as f64 * spacing).collect()
}

impl CategoricalCritic {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden_widths: &[usize],
        activation: Activation,
        num_atoms: usize,
        v_min: f64,
        v_max: f64,
        seed: u64,
    ) -> Self {
        let spec = MlpSpec::new(
            state_dim + action_dim,
            hidden_widths.to_vec(),
            num_atoms,
            activation,
        );
        Self {
            state_dim,
            action_dim,
            v_min,
            v_max,
            atoms: uniform_atoms(num_atoms, v_min, v_max),
            params: mlp_init(&spec, seed),
        }
    }

    pub fn atom_spacing(&self) -> f64 {
        self.atoms[1] - self.atoms[0]
    }

    pub fn target_state(&self, tau: f64) -> TargetCriticState {
        TargetCriticState {
            params: self.params.clone(),
            tau,
        }
    }

    fn net_input(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        assert_eq!(s.len(), self.state_dim, "state dimension mismatch");
        assert_eq!(a.len(), self.action_dim, "action dimension mismatch");
        let mut input = Vec::with_capacity(s.len() + a.len());
        input.extend_from_slice(s);
        input.extend_from_slice(a);
        input
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn distribution_with(critic: &CategoricalCritic, params: &ParamSet, s: &[f64], a: &[f64]) -> ReturnDistribution {
    let logits = mlp_forward(params, &critic.net_input(s, a));
    ReturnDistribution {
        probabilities: softmax(&logits),
    }
}

/// Softmax of the online logits at `(s, a)`.
pub fn return_distribution(critic: &CategoricalCritic, s: &[f64], a: &[f64]) -> ReturnDistribution {
    distribution_with(critic, &critic.params, s, a)
}

/// Scalar Q value: the mean of the return distribution.
pub fn q_value(critic: &CategoricalCritic, s: &[f64], a: &[f64]) -> f64 {
    let dist = return_distribution(critic, s, a);
    dist.probabilities
        .iter()
        .zip(&critic.atoms)
        .map(|(p, z)| p * z)
        .sum()
}

impl QFunction for CategoricalCritic {
    fn q_value(&self, s: &[f64], a: &[f64]) -> f64 {
        q_value(self, s, a)
    }
}

/// Projects mass sitting at `shifted_atoms` back onto the support: each
/// shifted atom's probability is split linearly between its two neighbors,
/// with out-of-range mass clamped to the boundary atoms.
pub fn project_categorical(
    atoms: &[f64],
    shifted_atoms: &[f64],
    probs: &ReturnDistribution,
) -> ReturnDistribution {
    assert_eq!(shifted_atoms.len(), probs.probabilities.len(), "shape mismatch");
    let m = atoms.len();
    let v_min = atoms[0];
    let v_max = atoms[m - 1];
    let spacing = (v_max - v_min) / (m - 1) as f64;
    let mut out = vec![0.0; m];
    for (&tz, &p) in shifted_atoms.iter().zip(&probs.probabilities) {
        let clamped = tz.clamp(v_min, v_max);
        let b = (clamped - v_min) / spacing;
        let lower = (b.floor() as usize).min(m - 1);
        let upper = (b.ceil() as usize).min(m - 1);
        if lower == upper {
            out[lower] += p;
        } else {
            out[lower] += p * (upper as f64 - b);
            out[upper] += p * (b - lower as f64);
        }
    }
    ReturnDistribution { probabilities: out }
}

/// Projected soft Bellman target for one transition, built from the target
/// network's distribution at `(s', a')` with `a'` sampled through the
/// mean-flow chain. Terminal transitions collapse to a point mass at the
/// reward, so no next action is drawn for them.
///
/// Returns the target distribution along with `log pi(a'|s')` when a next
/// action was sampled (reused for entropy estimates). The distribution is a
/// constant for the critic loss.
#[allow(clippy::too_many_arguments)]
pub fn bellman_target<R: Rng + ?Sized>(
    critic: &CategoricalCritic,
    target: &TargetCriticState,
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    alpha: f64,
    gamma: f64,
    t_steps: usize,
    transition: &Transition,
    rng: &mut R,
) -> Result<(ReturnDistribution, Option<f64>)> {
    if transition.done {
        let point = point_mass_at(critic, transition.reward);
        return Ok((point, None));
    }
    let next = sample_action(policy, divnet, &transition.next_state, t_steps, rng)?;
    let log_pi = next.log_likelihood;
    let next_dist = distribution_with(critic, &target.params, &transition.next_state, &next.action);
    let shifted: Vec<f64> = critic
        .atoms
        .iter()
        .map(|z| transition.reward + gamma * (z - alpha * log_pi))
        .collect();
    Ok((
        project_categorical(&critic.atoms, &shifted, &next_dist),
        Some(log_pi),
    ))
}

fn point_mass_at(critic: &CategoricalCritic, value: f64) -> ReturnDistribution {
    let shifted = vec![value; 1];
    let probs = ReturnDistribution {
        probabilities: vec![1.0],
    };
    project_categorical(&critic.atoms, &shifted, &probs)
}

/// Cross-entropy regression of the predicted distributions onto the
/// (constant) targets, with one Adam step. Returns the pre-step loss.
pub fn critic_update(
    critic: &mut CategoricalCritic,
    optimizer: &mut AdamState,
    batch: &[(Vec<f64>, Vec<f64>)],
    targets: &[ReturnDistribution],
) -> Result<f64> {
    assert_eq!(batch.len(), targets.len(), "batch/target length mismatch");
    assert!(!batch.is_empty(), "empty batch");
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = ParamGradient::zeros(&critic.params);
    let mut total = 0.0;

    for ((s, a), tgt) in batch.iter().zip(targets) {
        let input = critic.net_input(s, a);
        let logits = mlp_forward(&critic.params, &input);
        let probs = softmax(&logits);
        // Stable cross-entropy via log-softmax.
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let ce: f64 = tgt
            .probabilities
            .iter()
            .zip(&logits)
            .map(|(p, l)| -p * (l - lse))
            .sum();
        total += ce;
        let cot: Vec<f64> = probs
            .iter()
            .zip(&tgt.probabilities)
            .map(|(p, q)| (p - q) * inv_b)
            .collect();
        mlp_vjp_accumulate(&critic.params, &input, &cot, &mut grad);
    }

    let loss = total * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            context: "critic_update",
            loss,
        });
    }
    adam_step(optimizer, &mut critic.params, &grad)?;
    Ok(loss)
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_update(target: &mut TargetCriticState, online: &ParamSet) {
    assert_eq!(target.params.layers.len(), online.layers.len(), "layer count mismatch");
    let tau = target.tau;
    for (tl, ol) in target.params.layers.iter_mut().zip(&online.layers) {
        assert_eq!(tl.weights.len(), ol.weights.len(), "weight shape mismatch");
        for (t, o) in tl.weights.iter_mut().zip(&ol.weights) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        for (t, o) in tl.bias.iter_mut().zip(&ol.bias) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::mlp_vjp;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_critic(seed: u64) -> CategoricalCritic {
        CategoricalCritic::new(2, 2, &[16], Activation::Gelu, 11, -2.0, 2.0, seed)
    }

    #[test]
    fn zero_logits_give_uniform_distribution() {
        let mut critic = small_critic(0);
        for l in &mut critic.params.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let dist = return_distribution(&critic, &[0.1, 0.2], &[0.3, 0.4]);
        for p in &dist.probabilities {
            assert!((p - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_argmax_matches_logits() {
        let critic = small_critic(1);
        let s = [0.5, -0.5];
        let a = [1.0, 1.0];
        let dist = return_distribution(&critic, &s, &a);
        let sum: f64 = dist.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let logits = mlp_forward(&critic.params, &critic.net_input(&s, &a));
        let argmax_p = dist
            .probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let argmax_l = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_p, argmax_l);
    }

    #[test]
    fn q_value_of_uniform_distribution_on_symmetric_atoms_is_zero() {
        let atoms = uniform_atoms(3, -1.0, 1.0);
        assert_eq!(atoms, vec![-1.0, 0.0, 1.0]);
        let q: f64 = atoms.iter().map(|z| z / 3.0).sum();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn q_value_matches_independent_dot_product() {
        let critic = small_critic(2);
        let s = [0.3, 0.9];
        let a = [-0.2, 0.1];
        let dist = return_distribution(&critic, &s, &a);
        let mut direct = 0.0;
        for i in 0..critic.atoms.len() {
            direct += dist.probabilities[i] * critic.atoms[i];
        }
        assert!((q_value(&critic, &s, &a) - direct).abs() <= 1e-12);
    }

    #[test]
    fn point_mass_q_value_is_the_atom() {
        let critic = small_critic(3);
        let dist = point_mass_at(&critic, critic.atoms[4]);
        let q: f64 = dist
            .probabilities
            .iter()
            .zip(&critic.atoms)
            .map(|(p, z)| p * z)
            .sum();
        assert!((q - critic.atoms[4]).abs() < 1e-12);
    }

    #[test]
    fn projection_is_identity_on_grid() {
        let atoms = uniform_atoms(5, 0.0, 4.0);
        let probs = ReturnDistribution {
            probabilities: vec![0.1, 0.2, 0.3, 0.25, 0.15],
        };
        let out = project_categorical(&atoms, &atoms, &probs);
        for (a, b) in out.probabilities.iter().zip(&probs.probabilities) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_splits_halfway_mass_evenly() {
        let atoms = uniform_atoms(5, 0.0, 4.0);
        let shifted = vec![1.5];
        let probs = ReturnDistribution {
            probabilities: vec![1.0],
        };
        let out = project_categorical(&atoms, &shifted, &probs);
        assert!((out.probabilities[1] - 0.5).abs() < 1e-15);
        assert!((out.probabilities[2] - 0.5).abs() < 1e-15);
    }

    // Brute-force projection oracle: explicit per-atom loop with intervals.
    fn brute_force_projection(atoms: &[f64], shifted: &[f64], probs: &[f64]) -> Vec<f64> {
        let m = atoms.len();
        let spacing = atoms[1] - atoms[0];
        let mut out = vec![0.0; m];
        for (&tz, &p) in shifted.iter().zip(probs) {
            let tz = tz.clamp(atoms[0], atoms[m - 1]);
            for (k, out_k) in out.iter_mut().enumerate() {
                let dist = (tz - atoms[k]).abs();
                if dist < spacing {
                    *out_k += p * (1.0 - dist / spacing);
                }
            }
        }
        out
    }

    #[test]
    fn projection_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms = uniform_atoms(11, -3.0, 3.0);
        for _ in 0..500 {
            let shifted: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
            let raw: Vec<f64> = (0..11).map(|_| rng.random_range(0.0..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
            let dist = ReturnDistribution {
                probabilities: probs.clone(),
            };
            let fast = project_categorical(&atoms, &shifted, &dist);
            let slow = brute_force_projection(&atoms, &shifted, &probs);
            for (a, b) in fast.probabilities.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
            let total: f64 = fast.probabilities.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn on_grid_shift_permutes_mass() {
        let atoms = uniform_atoms(6, 0.0, 5.0);
        let probs = ReturnDistribution {
            probabilities: vec![0.0, 0.5, 0.3, 0.2, 0.0, 0.0],
        };
        let shifted: Vec<f64> = atoms.iter().map(|z| z + 2.0).collect();
        let out = project_categorical(&atoms, &shifted, &probs);
        assert!((out.probabilities[3] - 0.5).abs() < 1e-15);
        assert!((out.probabilities[4] - 0.3).abs() < 1e-15);
        assert!((out.probabilities[5] - 0.2).abs() < 1e-15);
    }

    fn dummy_nets() -> (AvgVelocityNet, AvgDivergenceNet) {
        (
            AvgVelocityNet::new(2, 2, &[8], Activation::Gelu, 5),
            AvgDivergenceNet::new(2, 2, &[8], Activation::Gelu, 6),
        )
    }

    #[test]
    fn terminal_transition_targets_point_mass_at_reward() {
        let critic = small_critic(7);
        let target = critic.target_state(0.005);
        let (policy, divnet) = dummy_nets();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Reward exactly on the grid.
        let reward = critic.atoms[6];
        let tr = Transition {
            state: vec![0.0, 0.0],
            action: vec![0.0, 0.0],
            reward,
            next_state: vec![0.0, 0.0],
            done: true,
        };
        let (dist, logp) =
            bellman_target(&critic, &target, &policy, &divnet, 0.2, 0.99, 2, &tr, &mut rng).unwrap();
        assert!(logp.is_none());
        assert!((dist.probabilities[6] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_target_depends_only_on_reward() {
        let critic = small_critic(9);
        let target = critic.target_state(0.005);
        let (policy, divnet) = dummy_nets();
        let tr = Transition {
            state: vec![0.1, 0.1],
            action: vec![0.0, 0.0],
            reward: 0.5,
            next_state: vec![0.9, -0.9],
            done: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (dist, logp) =
            bellman_target(&critic, &target, &policy, &divnet, 0.2, 0.0, 2, &tr, &mut rng).unwrap();
        assert!(logp.is_some());
        let mean: f64 = dist
            .probabilities
            .iter()
            .zip(&critic.atoms)
            .map(|(p, z)| p * z)
            .sum();
        assert!((mean - 0.5).abs() <= critic.atom_spacing());
    }

    #[test]
    fn projected_target_mean_matches_scalar_soft_target() {
        let critic = small_critic(11);
        let target = critic.target_state(0.005);
        let (policy, divnet) = dummy_nets();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..50 {
            let tr = Transition {
                state: stats::draw_standard_normal(&mut rng, 2),
                action: stats::draw_standard_normal(&mut rng, 2),
                reward: rng.random_range(-0.5..0.5),
                next_state: stats::draw_standard_normal(&mut rng, 2),
                done: false,
            };
            let alpha = 0.1;
            let gamma = 0.9;
            // Re-run the sampling with a cloned rng to recover a' and log pi.
            let mut probe_rng = rng.clone();
            let (dist, logp) = bellman_target(
                &critic, &target, &policy, &divnet, alpha, gamma, 2, &tr, &mut rng,
            )
            .unwrap();
            let next = sample_action(&policy, &divnet, &tr.next_state, 2, &mut probe_rng).unwrap();
            assert_eq!(logp, Some(next.log_likelihood));
            let q_next: f64 = {
                let d = distribution_with(&critic, &target.params, &tr.next_state, &next.action);
                d.probabilities
                    .iter()
                    .zip(&critic.atoms)
                    .map(|(p, z)| p * z)
                    .sum()
            };
            let scalar = tr.reward + gamma * (q_next - alpha * next.log_likelihood);
            let mean: f64 = dist
                .probabilities
                .iter()
                .zip(&critic.atoms)
                .map(|(p, z)| p * z)
                .sum();
            // Clamping can bite when the scalar target leaves the support.
            let clamped = scalar.clamp(critic.v_min, critic.v_max);
            assert!(
                (mean - clamped).abs() <= critic.atom_spacing() + 1e-12,
                "trial {trial}: mean {mean} vs scalar {scalar}"
            );
        }
    }

    #[test]
    fn cross_entropy_attains_target_entropy_at_match() {
        let mut critic = small_critic(13);
        let mut opt = AdamState::new(&critic.params, 1e-3);
        let s = vec![0.2, 0.2];
        let a = vec![0.1, -0.1];
        // Use the critic's own prediction as target: loss = entropy(target).
        let tgt = return_distribution(&critic, &s, &a);
        let entropy: f64 = tgt
            .probabilities
            .iter()
            .map(|p| if *p > 0.0 { -p * p.ln() } else { 0.0 })
            .sum();
        let loss = critic_update(&mut critic, &mut opt, &[(s, a)], &[tgt]).unwrap();
        assert!((loss - entropy).abs() < 1e-12);
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let mut critic = small_critic(14);
        let mut opt = AdamState::new(&critic.params, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..16)
            .map(|_| {
                (
                    stats::draw_standard_normal(&mut rng, 2),
                    stats::draw_standard_normal(&mut rng, 2),
                )
            })
            .collect();
        let targets: Vec<ReturnDistribution> = (0..16)
            .map(|_| {
                let raw: Vec<f64> = (0..11).map(|_| rng.random_range(0.01..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                ReturnDistribution {
                    probabilities: raw.into_iter().map(|p| p / sum).collect(),
                }
            })
            .collect();
        let first = critic_update(&mut critic, &mut opt, &batch, &targets).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = critic_update(&mut critic, &mut opt, &batch, &targets).unwrap();
        }
        assert!(last < first, "first {first} last {last}");
    }

    #[test]
    fn critic_gradient_matches_finite_differences_on_slice() {
        let critic = small_critic(16);
        let s = vec![0.4, -0.3];
        let a = vec![0.2, 0.2];
        let raw: Vec<f64> = (1..=11).map(|i| i as f64).collect();
        let sum: f64 = raw.iter().sum();
        let tgt = ReturnDistribution {
            probabilities: raw.into_iter().map(|p| p / sum).collect(),
        };

        let loss_at = |params: &ParamSet| -> f64 {
            let logits = mlp_forward(params, &critic.net_input(&s, &a));
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            tgt.probabilities
                .iter()
                .zip(&logits)
                .map(|(p, l)| -p * (l - lse))
                .sum()
        };

        let input = critic.net_input(&s, &a);
        let logits = mlp_forward(&critic.params, &input);
        let probs = softmax(&logits);
        let cot: Vec<f64> = probs
            .iter()
            .zip(&tgt.probabilities)
            .map(|(p, q)| p - q)
            .collect();
        let (grad, _) = mlp_vjp(&critic.params, &input, &cot);

        let h = 1e-6;
        for (l, k) in [(0usize, 0usize), (0, 7), (1, 13)] {
            let mut up = critic.params.clone();
            up.layers[l].weights[k] += h;
            let mut dn = critic.params.clone();
            dn.layers[l].weights[k] -= h;
            let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
            let an = grad.layers[l].weights[k];
            let rel = (an - fd).abs() / fd.abs().max(1e-4);
            assert!(rel <= 1e-4, "w[{l}][{k}]: {an} vs {fd}");
        }
    }

    #[test]
    fn polyak_endpoints() {
        let critic = small_critic(17);
        let other = small_critic(18);

        let mut full = TargetCriticState {
            params: other.params.clone(),
            tau: 1.0,
        };
        polyak_update(&mut full, &critic.params);
        assert_eq!(full.params, critic.params);

        let mut frozen = TargetCriticState {
            params: other.params.clone(),
            tau: 0.0,
        };
        polyak_update(&mut frozen, &critic.params);
        assert_eq!(frozen.params, other.params);
    }

    #[test]
    fn polyak_distance_shrinks_geometrically() {
        let critic = small_critic(19);
        let other = small_critic(20);
        let tau = 0.005;
        let mut target = TargetCriticState {
            params: other.params.clone(),
            tau,
        };
        let distance = |p: &ParamSet| -> f64 {
            p.layers
                .iter()
                .zip(&critic.params.layers)
                .map(|(a, b)| {
                    a.weights
                        .iter()
                        .zip(&b.weights)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .sum::<f64>()
                .sqrt()
        };
        let d0 = distance(&target.params);
        let n = 100;
        for _ in 0..n {
            polyak_update(&mut target, &critic.params);
        }
        let expect = d0 * (1.0 - tau).powi(n);
        let got = distance(&target.params);
        assert!((got - expect).abs() <= 1e-9 * d0, "{got} vs {expect}");
    }
}
