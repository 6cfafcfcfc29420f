//! Checkpoint bundles: one directory holding the three parameter blobs, the
//! temperature state, and the training RNG state, described by
//! `bundle.json`.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::critic::{CategoricalCritic, TargetCriticState};
use crate::diffcore::{load_blob, save_blob, AdamState};
use crate::divnet::AvgDivergenceNet;
use crate::error::{Error, Result};
use crate::meanflow::AvgVelocityNet;
use crate::train::{Agent, AlphaState};

#[derive(Serialize, Deserialize)]
struct RngState {
    seed_hex: String,
    word_pos: u128,
    stream: u64,
}

#[derive(Serialize, Deserialize)]
struct Bundle {
    step: u64,
    state_dim: usize,
    action_dim: usize,
    t_steps: usize,
    auto_alpha: bool,
    alpha: AlphaState,
    tau: f64,
    num_atoms: usize,
    v_min: f64,
    v_max: f64,
    actor_lr: f64,
    divnet_lr: f64,
    critic_lr: f64,
    rng: RngState,
}

fn rng_state(rng: &ChaCha8Rng) -> RngState {
    let seed = rng.get_seed();
    RngState {
        seed_hex: seed.iter().map(|b| format!("{b:02x}")).collect(),
        word_pos: rng.get_word_pos(),
        stream: rng.get_stream(),
    }
}

fn restore_rng(state: &RngState) -> Result<ChaCha8Rng> {
    if state.seed_hex.len() != 64 {
        return Err(Error::Checkpoint("rng seed must be 32 bytes of hex".into()));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in state.seed_hex.as_bytes().chunks(2).enumerate() {
        let s = std::str::from_utf8(chunk).map_err(|_| Error::Checkpoint("bad rng hex".into()))?;
        seed[i] = u8::from_str_radix(s, 16).map_err(|_| Error::Checkpoint("bad rng hex".into()))?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(state.stream);
    rng.set_word_pos(state.word_pos);
    Ok(rng)
}

pub fn save_agent(dir: &Path, agent: &Agent, rng: &ChaCha8Rng, step: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let bundle = Bundle {
        step,
        state_dim: agent.policy.state_dim,
        action_dim: agent.policy.action_dim,
        t_steps: agent.t_steps,
        auto_alpha: agent.auto_alpha,
        alpha: agent.alpha,
        tau: agent.target.tau,
        num_atoms: agent.critic.atoms.len(),
        v_min: agent.critic.v_min,
        v_max: agent.critic.v_max,
        actor_lr: agent.policy_opt.learning_rate,
        divnet_lr: agent.divnet_opt.learning_rate,
        critic_lr: agent.critic_opt.learning_rate,
        rng: rng_state(rng),
    };
    std::fs::write(dir.join("bundle.json"), serde_json::to_vec_pretty(&bundle)?)?;

    let policy_meta = json!({
        "kind": "policy",
        "state_dim": agent.policy.state_dim,
        "action_dim": agent.policy.action_dim,
        "spec": agent.policy.params.spec(),
        "t_steps": agent.t_steps,
    });
    save_blob(&dir.join("policy.bin"), &policy_meta, &agent.policy.params)?;

    let divnet_meta = json!({
        "kind": "divnet",
        "state_dim": agent.divnet.state_dim,
        "action_dim": agent.divnet.action_dim,
        "spec": agent.divnet.params.spec(),
    });
    save_blob(&dir.join("divnet.bin"), &divnet_meta, &agent.divnet.params)?;

    let critic_meta = json!({
        "kind": "critic",
        "atoms": {"m": agent.critic.atoms.len(), "v_min": agent.critic.v_min, "v_max": agent.critic.v_max},
    });
    save_blob(&dir.join("critic.bin"), &critic_meta, &agent.critic.params)?;
    save_blob(&dir.join("critic_target.bin"), &critic_meta, &agent.target.params)?;
    Ok(())
}

pub struct LoadedCheckpoint {
    pub agent: Agent,
    pub rng: ChaCha8Rng,
    pub step: u64,
}

pub fn load_agent(dir: &Path) -> Result<LoadedCheckpoint> {
    let bundle_path = dir.join("bundle.json");
    let text = std::fs::read_to_string(&bundle_path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", bundle_path.display())))?;
    let bundle: Bundle = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("bad bundle.json: {e}")))?;

    let (_, policy_params) = load_blob(&dir.join("policy.bin"))?;
    let (_, divnet_params) = load_blob(&dir.join("divnet.bin"))?;
    let (_, critic_params) = load_blob(&dir.join("critic.bin"))?;
    let (_, target_params) = load_blob(&dir.join("critic_target.bin"))?;

    let policy = AvgVelocityNet::from_params(bundle.state_dim, bundle.action_dim, policy_params);
    let divnet = AvgDivergenceNet::from_params(bundle.state_dim, bundle.action_dim, divnet_params);
    if critic_params.input_dim() != bundle.state_dim + bundle.action_dim {
        return Err(Error::Checkpoint("critic input does not match bundle dims".into()));
    }
    if critic_params.output_dim() != bundle.num_atoms {
        return Err(Error::Checkpoint("critic output does not match atom count".into()));
    }
    let critic = CategoricalCritic {
        state_dim: bundle.state_dim,
        action_dim: bundle.action_dim,
        v_min: bundle.v_min,
        v_max: bundle.v_max,
        atoms: crate::critic::uniform_atoms(bundle.num_atoms, bundle.v_min, bundle.v_max),
        params: critic_params,
    };
    let target = TargetCriticState {
        params: target_params,
        tau: bundle.tau,
    };
    let agent = Agent {
        policy_opt: AdamState::new(&policy.params, bundle.actor_lr),
        divnet_opt: AdamState::new(&divnet.params, bundle.divnet_lr),
        critic_opt: AdamState::new(&critic.params, bundle.critic_lr),
        policy,
        divnet,
        critic,
        target,
        alpha: bundle.alpha,
        auto_alpha: bundle.auto_alpha,
        t_steps: bundle.t_steps,
    };
    Ok(LoadedCheckpoint {
        agent,
        rng: restore_rng(&bundle.rng)?,
        step: bundle.step,
    })
}

/// The conventional layout of a run directory.
pub fn checkpoint_dir(run_dir: &Path, label: &str) -> PathBuf {
    run_dir.join("checkpoints").join(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use rand::RngCore;

    #[test]
    fn save_load_round_trip_preserves_everything() {
        let config = TrainConfig {
            hidden_widths: vec![8, 8],
            ..TrainConfig::gmm_toy()
        };
        let agent = Agent::new(&config, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        // Advance the stream so the stored position is non-trivial.
        for _ in 0..7 {
            rng.next_u64();
        }
        let dir = tempfile::tempdir().unwrap();
        save_agent(dir.path(), &agent, &rng, 123).unwrap();
        let mut loaded = load_agent(dir.path()).unwrap();
        assert_eq!(loaded.step, 123);
        assert_eq!(loaded.agent.policy.params, agent.policy.params);
        assert_eq!(loaded.agent.divnet.params, agent.divnet.params);
        assert_eq!(loaded.agent.critic.params, agent.critic.params);
        assert_eq!(loaded.agent.target.params, agent.target.params);
        assert_eq!(loaded.agent.alpha.log_alpha, agent.alpha.log_alpha);
        assert_eq!(loaded.agent.t_steps, agent.t_steps);
        // The restored rng must continue the exact stream.
        let mut rng2 = rng.clone();
        assert_eq!(loaded.rng.next_u64(), rng2.next_u64());
    }

    #[test]
    fn missing_bundle_is_a_checkpoint_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_agent(dir.path());
        assert!(matches!(err, Err(Error::Checkpoint(_))));
    }
}
