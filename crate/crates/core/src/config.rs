//! Run configuration: one JSON file, every knob a named key, with
//! dotted-path command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diffcore::Activation;
use crate::envs::EnvParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub env: String,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub divnet_lr: f64,
    pub alpha_lr: f64,
    /// Number of sampling steps T.
    pub sampling_steps: usize,
    /// Policy-proposal sample budget K1.
    pub k_policy: usize,
    /// Gaussian-proposal sample budget K2.
    pub k_gaussian: usize,
    /// Probe count N for divergence estimation.
    pub n_probes: usize,
    /// Target-entropy coefficient: H_target = -rho * dim(A).
    pub rho: f64,
    pub auto_alpha: bool,
    pub initial_alpha: f64,
    /// Candidate count for evaluation-time action selection.
    pub m_candidates: usize,
    pub update_to_data: f64,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub num_atoms: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub p_equal: f64,
    /// Evaluation cadence in environment steps; 0 disables scheduled eval.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Checkpoint cadence in environment steps; 0 keeps only the final one.
    pub checkpoint_every: u64,
    /// Linear decay of the actor/critic/divnet learning rates over the
    /// second half of training, down to this fraction of the initial value.
    /// 1.0 keeps them constant.
    pub final_lr_fraction: f64,
    pub env_params: EnvParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: "gmm_bandit".into(),
            total_steps: 50_000,
            warmup_steps: 1_000,
            batch_size: 256,
            buffer_capacity: 100_000,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            divnet_lr: 3e-4,
            alpha_lr: 3e-4,
            sampling_steps: 2,
            k_policy: 16,
            k_gaussian: 32,
            n_probes: 2,
            rho: 0.5,
            auto_alpha: true,
            initial_alpha: 0.2,
            m_candidates: 10,
            update_to_data: 1.0,
            hidden_widths: vec![256, 256, 256],
            activation: Activation::Gelu,
            num_atoms: 51,
            v_min: -10.0,
            v_max: 10.0,
            t_min: 1e-3,
            t_max: 1.0 - 1e-3,
            p_equal: 0.5,
            eval_every: 1_000,
            eval_episodes: 10,
            checkpoint_every: 0,
            final_lr_fraction: 1.0,
            env_params: EnvParams::default(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset for the 2-D GMM bandit study. Fixed unit
    /// temperature makes the Boltzmann target equal to the GMM itself, and
    /// the atom grid covers the reachable log-density range.
    pub fn gmm_toy() -> Self {
        Self {
            env: "gmm_bandit".into(),
            total_steps: 20_000,
            warmup_steps: 1_000,
            batch_size: 64,
            hidden_widths: vec![64, 64],
            auto_alpha: false,
            initial_alpha: 1.0,
            k_policy: 8,
            k_gaussian: 16,
            v_max: 0.0,
            // Training-time flow times stay away from the interval ends.
            // With T = 2 nothing below t = 0.5 is ever queried at sampling
            // time; the policy-proposal weights degenerate as t -> 0; and
            // near t = 1 the Gaussian proposal's spread t/(1-t) outruns the
            // critic's discriminating range, which makes its Kish ESS look
            // perfect exactly when its estimate is worthless.
            t_min: 0.05,
            t_max: 0.85,
            num_atoms: 61,
            v_min: -60.0,
            final_lr_fraction: 0.1,
            eval_every: 2_000,
            eval_episodes: 50,
            ..Self::default()
        }
    }

    /// Desk-scale preset for the multi-goal point-mass task.
    pub fn point_mass() -> Self {
        Self {
            env: "point_mass".into(),
            total_steps: 100_000,
            warmup_steps: 1_000,
            batch_size: 64,
            hidden_widths: vec![64, 64],
            k_policy: 8,
            k_gaussian: 16,
            num_atoms: 51,
            v_min: -5.0,
            v_max: 75.0,
            t_min: 0.05,
            t_max: 0.85,
            final_lr_fraction: 0.1,
            eval_every: 5_000,
            eval_episodes: 10,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let config: TrainConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.env.is_empty() {
            return fail("env name must be set");
        }
        if !matches!(self.env.as_str(), "gmm_bandit" | "point_mass") {
            return fail(&format!("unknown environment '{}'", self.env));
        }
        if self.total_steps == 0 {
            return fail("total_steps must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return fail("batch_size and buffer_capacity must be positive");
        }
        if self.sampling_steps == 0 {
            return fail("sampling_steps must be >= 1");
        }
        if self.k_policy + self.k_gaussian == 0 {
            return fail("k_policy + k_gaussian must be >= 1");
        }
        if self.n_probes == 0 {
            return fail("n_probes must be >= 1");
        }
        if self.initial_alpha <= 0.0 {
            return fail("initial_alpha must be positive");
        }
        if self.num_atoms < 2 || self.v_min >= self.v_max {
            return fail("atom grid needs num_atoms >= 2 and v_min < v_max");
        }
        if !(0.0 < self.t_min && self.t_min <= self.t_max && self.t_max < 1.0) {
            return fail("need 0 < t_min <= t_max < 1");
        }
        if !(0.0..=1.0).contains(&self.p_equal) {
            return fail("p_equal must lie in [0, 1]");
        }
        if self.hidden_widths.is_empty() {
            return fail("hidden_widths must be non-empty");
        }
        if self.m_candidates == 0 || self.eval_episodes == 0 {
            return fail("m_candidates and eval_episodes must be positive");
        }
        if self.update_to_data <= 0.0 {
            return fail("update_to_data must be positive");
        }
        Ok(())
    }
}

/// Applies one `dotted.path=value` override to a JSON tree. The value is
/// parsed as JSON when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("override '{spec}' has an empty path segment")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-object")))?;
        if i == parts.len() - 1 {
            obj.insert((*part).into(), parsed);
            return Ok(());
        }
        node = obj.entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}
