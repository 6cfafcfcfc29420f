//! Soft policy iteration: interaction, replay, policy evaluation with the
//! distributional critic, policy improvement through adaptive velocity
//! estimation, divergence-network training, temperature auto-tuning, and
//! evaluation-time action selection.

mod alpha;
mod replay;
mod trainer;

pub use alpha::{temperature_update, AlphaState};
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{
    estimate_entropy, evaluate_policy, improvement_step, select_action_eval, train, Agent,
    ImprovementConfig, ImprovementStats, MetricsRecord, TrainHooks, TrainResult,
};
