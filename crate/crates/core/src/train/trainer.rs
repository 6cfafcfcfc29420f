//! The training loop and its building blocks.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::alpha::{temperature_update, AlphaState};
use super::replay::{ReplayBuffer, Transition};
use crate::config::TrainConfig;
use crate::critic::{bellman_target, critic_update, polyak_update, CategoricalCritic, TargetCriticState};
use crate::diffcore::AdamState;
use crate::divnet::{divnet_update, AvgDivergenceNet, ProbeKind};
use crate::envs::{Environment, EnvSpec};
use crate::error::{Error, Result};
use crate::meanflow::{sample_action, sample_time_pair, AvgVelocityNet, MeanFlowSample, TimePairConfig};
use crate::meanflow::policy_update;
use crate::stats;
use crate::velest::{estimate_instantaneous_velocity, QFunction};

/// Sample budget and time-pair distribution for one improvement step.
#[derive(Debug, Clone)]
pub struct ImprovementConfig {
    pub k_policy: usize,
    pub k_gaussian: usize,
    pub n_probes: usize,
    pub t_steps: usize,
    pub time_pairs: TimePairConfig,
}

/// Losses and diagnostics from one improvement step. ESS means are
/// normalized by the respective sample budgets; `None` marks a skipped
/// proposal.
#[derive(Debug, Clone)]
pub struct ImprovementStats {
    pub policy_loss: f64,
    pub divnet_loss: f64,
    pub mean_ess_policy: Option<f64>,
    pub mean_ess_gaussian: Option<f64>,
    /// Mean negative log-likelihood of the policy samples drawn while
    /// building the batch; doubles as an entropy estimate.
    pub mean_policy_nll: f64,
}

/// Policy entropy estimate: the averaged negative log-likelihood of one
/// sampled action per state.
pub fn estimate_entropy<R: Rng + ?Sized>(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    states: &[Vec<f64>],
    t_steps: usize,
    rng: &mut R,
) -> Result<f64> {
    assert!(!states.is_empty(), "empty state batch");
    let mut total = 0.0;
    for s in states {
        let out = sample_action(policy, divnet, s, t_steps, rng)?;
        total += -out.log_likelihood;
    }
    Ok(total / states.len() as f64)
}

/// One soft policy-improvement step over a batch of states.
///
/// Per state: draws `(r, t)`, pairs a fresh policy sample `a_0` with fresh
/// prior noise to form `a_t = (1-t) a_0 + t a_1` (keeping `a_t` on the
/// current policy's path distribution), estimates the marginal velocity via
/// the two-proposal SNIS machinery, and regresses `u` onto the
/// stop-gradient targets. The divergence network is then updated on fresh
/// samples from the already-updated policy.
#[allow(clippy::too_many_arguments)]
pub fn improvement_step<R: Rng + ?Sized>(
    policy: &mut AvgVelocityNet,
    policy_opt: &mut AdamState,
    divnet: &mut AvgDivergenceNet,
    divnet_opt: &mut AdamState,
    q: &dyn QFunction,
    alpha: f64,
    states: &[Vec<f64>],
    config: &ImprovementConfig,
    rng: &mut R,
) -> Result<ImprovementStats> {
    assert!(!states.is_empty(), "empty state batch");
    let action_dim = policy.action_dim;

    let mut batch = Vec::with_capacity(states.len());
    let mut ess_policy = Vec::new();
    let mut ess_gaussian = Vec::new();
    let mut nll_total = 0.0;
    for s in states {
        let tp = sample_time_pair(rng, &config.time_pairs);
        let sampled = sample_action(policy, divnet, s, config.t_steps, rng)?;
        nll_total += -sampled.log_likelihood;
        let a1 = stats::draw_standard_normal(rng, action_dim);
        let a_t: Vec<f64> = sampled
            .action
            .iter()
            .zip(&a1)
            .map(|(a0, x1)| (1.0 - tp.t) * a0 + tp.t * x1)
            .collect();
        let estimate = estimate_instantaneous_velocity(
            policy,
            divnet,
            q,
            s,
            &a_t,
            tp.t,
            alpha,
            config.k_policy,
            config.k_gaussian,
            config.t_steps,
            rng,
        )?;
        if config.k_policy > 0 {
            ess_policy.push(estimate.component_ess[0] / config.k_policy as f64);
        }
        if config.k_gaussian > 0 {
            ess_gaussian.push(estimate.component_ess[1] / config.k_gaussian as f64);
        }
        batch.push(MeanFlowSample {
            state: s.clone(),
            a_t,
            r: tp.r,
            t: tp.t,
            v_hat: estimate.velocity,
        });
    }
    let policy_loss = policy_update(policy, policy_opt, &batch)?;

    // Divergence-net training on fresh samples from the updated policy.
    let mut div_batch = Vec::with_capacity(states.len());
    for s in states {
        let sampled = sample_action(policy, divnet, s, config.t_steps, rng)?;
        div_batch.push((s.clone(), sampled.action));
    }
    let divnet_loss = divnet_update(
        divnet,
        divnet_opt,
        policy,
        &div_batch,
        config.n_probes,
        ProbeKind::Gaussian,
        &config.time_pairs,
        rng,
    )?;

    let mean_opt = |v: &Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(stats::mean(v))
        }
    };
    Ok(ImprovementStats {
        policy_loss,
        divnet_loss,
        mean_ess_policy: mean_opt(&ess_policy),
        mean_ess_gaussian: mean_opt(&ess_gaussian),
        mean_policy_nll: nll_total / states.len() as f64,
    })
}

/// Evaluation-time action selection: samples `m_candidates` actions and
/// returns the one with the highest Q value, ties broken by the lowest
/// candidate index.
pub fn select_action_eval<R: Rng + ?Sized>(
    policy: &AvgVelocityNet,
    divnet: &AvgDivergenceNet,
    q: &dyn QFunction,
    s: &[f64],
    m_candidates: usize,
    t_steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    assert!(m_candidates >= 1, "need at least one candidate");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..m_candidates {
        let candidate = sample_action(policy, divnet, s, t_steps, rng)?.action;
        let value = q.q_value(s, &candidate);
        let better = match &best {
            None => true,
            Some((best_value, _)) => value > *best_value,
        };
        if better {
            best = Some((value, candidate));
        }
    }
    Ok(best.expect("m_candidates >= 1").1)
}

/// All learnable state of one run.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: AvgVelocityNet,
    pub policy_opt: AdamState,
    pub divnet: AvgDivergenceNet,
    pub divnet_opt: AdamState,
    pub critic: CategoricalCritic,
    pub critic_opt: AdamState,
    pub target: TargetCriticState,
    pub alpha: AlphaState,
    pub auto_alpha: bool,
    pub t_steps: usize,
}

impl Agent {
    pub fn new(config: &TrainConfig, state_dim: usize, action_dim: usize) -> Self {
        let policy = AvgVelocityNet::new(
            state_dim,
            action_dim,
            &config.hidden_widths,
            config.activation,
            config.seed.wrapping_add(1),
        );
        let divnet = AvgDivergenceNet::new(
            state_dim,
            action_dim,
            &config.hidden_widths,
            config.activation,
            config.seed.wrapping_add(2),
        );
        let critic = CategoricalCritic::new(
            state_dim,
            action_dim,
            &config.hidden_widths,
            config.activation,
            config.num_atoms,
            config.v_min,
            config.v_max,
            config.seed.wrapping_add(3),
        );
        let target = critic.target_state(config.tau);
        let target_entropy = -config.rho * action_dim as f64;
        Self {
            policy_opt: AdamState::new(&policy.params, config.actor_lr),
            divnet_opt: AdamState::new(&divnet.params, config.divnet_lr),
            critic_opt: AdamState::new(&critic.params, config.critic_lr),
            policy,
            divnet,
            critic,
            target,
            alpha: AlphaState::new(config.initial_alpha, config.alpha_lr, target_entropy),
            auto_alpha: config.auto_alpha,
            t_steps: config.sampling_steps,
        }
    }

    pub fn improvement_config(&self, config: &TrainConfig) -> ImprovementConfig {
        ImprovementConfig {
            k_policy: config.k_policy,
            k_gaussian: config.k_gaussian,
            n_probes: config.n_probes,
            t_steps: self.t_steps,
            time_pairs: TimePairConfig {
                p_equal: config.p_equal,
                t_min: config.t_min,
                t_max: config.t_max,
            },
        }
    }
}

/// One metrics line per update step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub divnet_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub ess1: Option<f64>,
    pub ess2: Option<f64>,
    pub eval_return: Option<f64>,
}

/// Output sinks for a training run. Checkpoint and metrics emission stay
/// outside the loop so the library has no opinions about file layout.
#[derive(Default)]
pub struct TrainHooks<'a> {
    pub on_metrics: Option<&'a mut dyn FnMut(&MetricsRecord) -> Result<()>>,
    pub on_checkpoint: Option<&'a mut dyn FnMut(&Agent, &ChaCha8Rng, u64) -> Result<()>>,
    /// Where to dump the full agent state if a non-finite loss aborts the run.
    pub dump_dir: Option<PathBuf>,
}

pub struct TrainResult {
    pub agent: Agent,
    pub rng: ChaCha8Rng,
    pub final_step: u64,
    pub num_updates: u64,
}

fn uniform_box_action<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Vec<f64> {
    spec.action_low
        .iter()
        .zip(&spec.action_high)
        .map(|(lo, hi)| rng.random_range(*lo..*hi))
        .collect()
}

/// Mean return of greedy (Q-argmax over candidates) rollouts.
pub fn evaluate_policy<R: Rng>(
    agent: &Agent,
    env: &mut dyn Environment,
    episodes: usize,
    m_candidates: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    assert!(episodes >= 1, "need at least one episode");
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        let mut total = 0.0;
        loop {
            let a = select_action_eval(
                &agent.policy,
                &agent.divnet,
                &agent.critic,
                &s,
                m_candidates,
                agent.t_steps,
                rng,
            )?;
            let out = env.step(&a, rng);
            total += out.reward;
            if out.terminal || out.truncated {
                break;
            }
            s = out.next_state;
        }
        returns.push(total);
    }
    Ok(returns)
}

struct UpdateOutcome {
    record: MetricsRecord,
}

#[allow(clippy::too_many_arguments)]
fn update_once(
    agent: &mut Agent,
    buffer: &ReplayBuffer,
    config: &TrainConfig,
    improvement: &ImprovementConfig,
    step: u64,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateOutcome> {
    let indices = buffer.sample_indices(config.batch_size, rng);
    let transitions: Vec<Transition> = indices.iter().map(|&i| buffer.get(i).clone()).collect();

    // Policy evaluation: distributional soft Bellman targets, then one
    // cross-entropy step on the critic.
    let alpha = agent.alpha.alpha();
    let mut targets = Vec::with_capacity(transitions.len());
    let mut next_logps = Vec::new();
    for tr in &transitions {
        let (tgt, logp) = bellman_target(
            &agent.critic,
            &agent.target,
            &agent.policy,
            &agent.divnet,
            alpha,
            config.gamma,
            agent.t_steps,
            tr,
            rng,
        )?;
        targets.push(tgt);
        if let Some(lp) = logp {
            next_logps.push(lp);
        }
    }
    let sa: Vec<(Vec<f64>, Vec<f64>)> = transitions
        .iter()
        .map(|tr| (tr.state.clone(), tr.action.clone()))
        .collect();
    let critic_loss = critic_update(&mut agent.critic, &mut agent.critic_opt, &sa, &targets)?;

    // Policy improvement on the same batch of states.
    let states: Vec<Vec<f64>> = transitions.iter().map(|tr| tr.state.clone()).collect();
    let stats = improvement_step(
        &mut agent.policy,
        &mut agent.policy_opt,
        &mut agent.divnet,
        &mut agent.divnet_opt,
        &agent.critic,
        alpha,
        &states,
        improvement,
        rng,
    )?;

    // Temperature: reuse the likelihoods already computed for the critic
    // targets; fall back to the improvement-batch samples when every
    // transition in the batch was terminal.
    let entropy = if next_logps.is_empty() {
        stats.mean_policy_nll
    } else {
        -stats::mean(&next_logps)
    };
    if agent.auto_alpha {
        agent.alpha = temperature_update(&agent.alpha, entropy);
    }

    polyak_update(&mut agent.target, &agent.critic.params);

    Ok(UpdateOutcome {
        record: MetricsRecord {
            step,
            critic_loss,
            policy_loss: stats.policy_loss,
            divnet_loss: stats.divnet_loss,
            alpha: agent.alpha.alpha(),
            entropy,
            ess1: stats.mean_ess_policy,
            ess2: stats.mean_ess_gaussian,
            eval_return: None,
        },
    })
}

fn dump_state(agent: &Agent, rng: &ChaCha8Rng, step: u64, reason: &str, dir: &PathBuf) -> PathBuf {
    let dump = dir.join(format!("dump_step_{step}"));
    let _ = std::fs::create_dir_all(&dump);
    let _ = crate::checkpoint::save_agent(&dump, agent, rng, step);
    let diag = serde_json::json!({ "step": step, "reason": reason });
    let _ = std::fs::write(
        dump.join("diagnostics.json"),
        serde_json::to_vec_pretty(&diag).unwrap_or_default(),
    );
    dump
}

/// Runs the full loop: interaction and updates interleaved at the
/// configured update-to-data ratio, each update ordered as critic step,
/// policy + divergence-net step, temperature step, target blend. Emits one
/// metrics record per update; any non-finite loss aborts with a state dump.
pub fn train<F>(config: &TrainConfig, env_factory: F, hooks: &mut TrainHooks) -> Result<TrainResult>
where
    F: Fn() -> Result<Box<dyn Environment>>,
{
    config.validate()?;
    let mut env = env_factory()?;
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut agent = Agent::new(config, spec.state_dim, spec.action_dim);
    let improvement = agent.improvement_config(config);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);

    let mut state = env.reset(&mut rng);
    let mut update_budget = 0.0;
    let mut num_updates = 0u64;

    macro_rules! abort_on_err {
        ($step:expr, $expr:expr) => {
            match $expr {
                Ok(v) => v,
                Err(err) => {
                    let reason = err.to_string();
                    let dump_path = match &hooks.dump_dir {
                        Some(dir) => dump_state(&agent, &rng, $step, &reason, dir),
                        None => PathBuf::from("-"),
                    };
                    return Err(Error::TrainingAborted {
                        step: $step,
                        reason,
                        dump_path,
                    });
                }
            }
        };
    }

    for step in 1..=config.total_steps {
        let action = if step <= config.warmup_steps {
            uniform_box_action(&spec, &mut rng)
        } else {
            abort_on_err!(
                step,
                sample_action(&agent.policy, &agent.divnet, &state, agent.t_steps, &mut rng)
            )
            .action
        };
        let out = env.step(&action, &mut rng);
        buffer.push(Transition {
            state: std::mem::take(&mut state),
            action,
            reward: out.reward,
            next_state: out.next_state.clone(),
            done: out.terminal,
        });
        state = if out.terminal || out.truncated {
            env.reset(&mut rng)
        } else {
            out.next_state
        };

        if step > config.warmup_steps && buffer.len() >= config.batch_size {
            if config.final_lr_fraction < 1.0 {
                let span = (config.total_steps - config.warmup_steps).max(1) as f64;
                let frac = ((step - config.warmup_steps) as f64 / span - 0.5).max(0.0) * 2.0;
                let scale = 1.0 + frac * (config.final_lr_fraction - 1.0);
                agent.policy_opt.learning_rate = config.actor_lr * scale;
                agent.divnet_opt.learning_rate = config.divnet_lr * scale;
                agent.critic_opt.learning_rate = config.critic_lr * scale;
            }
            update_budget += config.update_to_data;
            let mut updates_this_step = Vec::new();
            while update_budget >= 1.0 {
                update_budget -= 1.0;
                let outcome = abort_on_err!(
                    step,
                    update_once(&mut agent, &buffer, config, &improvement, step, &mut rng)
                );
                num_updates += 1;
                updates_this_step.push(outcome.record);
            }
            let scheduled_eval =
                config.eval_every > 0 && step % config.eval_every == 0 && !updates_this_step.is_empty();
            if scheduled_eval {
                let mut eval_env = env_factory()?;
                let returns = abort_on_err!(
                    step,
                    evaluate_policy(
                        &agent,
                        eval_env.as_mut(),
                        config.eval_episodes,
                        config.m_candidates,
                        &mut rng
                    )
                );
                if let Some(last) = updates_this_step.last_mut() {
                    last.eval_return = Some(stats::mean(&returns));
                }
            }
            for record in &updates_this_step {
                if let Some(cb) = hooks.on_metrics.as_mut() {
                    cb(record)?;
                }
            }
            if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 {
                if let Some(cb) = hooks.on_checkpoint.as_mut() {
                    cb(&agent, &rng, step)?;
                }
            }
        }
    }

    Ok(TrainResult {
        agent,
        rng,
        final_step: config.total_steps,
        num_updates,
    })
}
