//! Mean-flow policies trained with maximum-entropy soft policy iteration.
//!
//! The stack, bottom to top:
//!
//! - [`diffcore`] — 64-bit autodiff for small MLPs (forward, JVP, VJP, Adam).
//! - [`meanflow`] — average-velocity policy network, few-step action
//!   sampling and the self-consistent regression target.
//! - [`divnet`] — average divergence network for action log-likelihoods,
//!   with Hutchinson trace estimation of the instantaneous divergence.
//! - [`velest`] — adaptive instantaneous-velocity estimation: two SNIS
//!   proposals combined by effective sample size.
//! - [`critic`] — categorical (C51-style) distributional soft critic.
//! - [`train`] — replay buffer, temperature auto-tuning and the full
//!   training loop.
//! - [`envs`] — desk-scale environments: a 6-mode GMM bandit and a
//!   multi-goal point-mass task.
//! - [`cli`] — train/eval/toy/diag/selfcheck commands.
//!
//! [`reference`] holds closed-form baselines (Gaussian flow, linear-Gaussian
//! Boltzmann target, fine-grained Euler likelihoods) used by diagnostics and
//! the self-check suite.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod critic;
pub mod diffcore;
pub mod divnet;
pub mod envs;
pub mod error;
pub mod meanflow;
pub mod reference;
pub mod selfcheck;
pub mod stats;
pub mod train;
pub mod velest;

pub use error::{Error, Result};
