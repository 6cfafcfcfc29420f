//! ESS / variance sweeps over flow time for the two SNIS proposals and
//! their combination, emitted as CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::Result;
use crate::reference::{oracle_velocity_estimate, LinearGaussianOracle};
use crate::stats;
use crate::train::Agent;
use crate::velest::{
    combined_velocity, conditional_log_weight, gaussian_proposal, policy_proposal, snis_estimate,
    QFunction,
};

/// One sweep row at flow time `t`. ESS columns are normalized by the sample
/// budgets; variances are traces of the empirical estimator covariance at a
/// fixed `(a_t, t)` across trials.
#[derive(Debug, Clone)]
pub struct EssSweepRow {
    pub t: f64,
    pub ess1_norm: f64,
    pub ess2_norm: f64,
    pub var1: f64,
    pub var2: f64,
    pub var_combined: f64,
}

fn trace_variance(estimates: &[Vec<f64>]) -> f64 {
    let n = estimates.len() as f64;
    let dim = estimates[0].len();
    let mut total = 0.0;
    for j in 0..dim {
        let vals: Vec<f64> = estimates.iter().map(|v| v[j]).collect();
        total += stats::variance(&vals);
    }
    let _ = n;
    total
}

/// Sweep on the closed-form linear-Gaussian target with the exact Boltzmann
/// policy proposal.
pub fn oracle_ess_sweep<R: Rng + ?Sized>(
    oracle: &LinearGaussianOracle,
    t_grid: &[f64],
    trials: usize,
    k1: usize,
    k2: usize,
    rng: &mut R,
) -> Result<Vec<EssSweepRow>> {
    assert!(trials >= 2, "need at least two trials for a variance");
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let a_t = oracle.path_marginal_sample(t, rng);
        let mut v1 = Vec::with_capacity(trials);
        let mut v2 = Vec::with_capacity(trials);
        let mut vc = Vec::with_capacity(trials);
        let mut ess1 = 0.0;
        let mut ess2 = 0.0;
        for _ in 0..trials {
            let (r1, r2, combined) = oracle_velocity_estimate(oracle, &a_t, t, k1, k2, rng)?;
            ess1 += r1.ess;
            ess2 += r2.ess;
            v1.push(r1.velocity);
            v2.push(r2.velocity);
            vc.push(combined);
        }
        rows.push(EssSweepRow {
            t,
            ess1_norm: ess1 / trials as f64 / k1 as f64,
            ess2_norm: ess2 / trials as f64 / k2 as f64,
            var1: trace_variance(&v1),
            var2: trace_variance(&v2),
            var_combined: trace_variance(&vc),
        });
    }
    Ok(rows)
}

/// Sweep on a trained agent: the policy proposal really samples the nets and
/// weights come from the critic's Q values at the given state.
#[allow(clippy::too_many_arguments)]
pub fn checkpoint_ess_sweep<R: Rng + ?Sized>(
    agent: &Agent,
    state: &[f64],
    t_grid: &[f64],
    trials: usize,
    k1: usize,
    k2: usize,
    rng: &mut R,
) -> Result<Vec<EssSweepRow>> {
    assert!(trials >= 2, "need at least two trials for a variance");
    assert!(k1 >= 1 && k2 >= 1, "sweep needs both proposals");
    let alpha = agent.alpha.alpha();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        // Fix a_t on the current policy's path distribution at this t.
        let sampled = crate::meanflow::sample_action(
            &agent.policy,
            &agent.divnet,
            state,
            agent.t_steps,
            rng,
        )?;
        let noise = stats::draw_standard_normal(rng, agent.policy.action_dim);
        let a_t: Vec<f64> = sampled
            .action
            .iter()
            .zip(&noise)
            .map(|(a0, z)| (1.0 - t) * a0 + t * z)
            .collect();

        let mut v1 = Vec::with_capacity(trials);
        let mut v2 = Vec::with_capacity(trials);
        let mut vc = Vec::with_capacity(trials);
        let mut ess1 = 0.0;
        let mut ess2 = 0.0;
        for _ in 0..trials {
            let pb = policy_proposal(&agent.policy, &agent.divnet, state, k1, agent.t_steps, rng)?;
            let lw1: Vec<f64> = pb
                .samples
                .iter()
                .zip(&pb.log_proposal)
                .map(|(a0, &lp)| {
                    conditional_log_weight(
                        agent.critic.q_value(state, a0),
                        alpha,
                        pb.source,
                        a0,
                        &a_t,
                        t,
                        lp,
                    )
                })
                .collect();
            let r1 = snis_estimate(&pb, &lw1, &a_t, t)?;

            let gb = gaussian_proposal(&a_t, t, k2, rng);
            let lw2: Vec<f64> = gb
                .samples
                .iter()
                .zip(&gb.log_proposal)
                .map(|(a0, &lp)| {
                    conditional_log_weight(
                        agent.critic.q_value(state, a0),
                        alpha,
                        gb.source,
                        a0,
                        &a_t,
                        t,
                        lp,
                    )
                })
                .collect();
            let r2 = snis_estimate(&gb, &lw2, &a_t, t)?;

            let combined = combined_velocity(&r1, &r2);
            ess1 += r1.ess;
            ess2 += r2.ess;
            v1.push(r1.velocity);
            v2.push(r2.velocity);
            vc.push(combined.velocity);
        }
        rows.push(EssSweepRow {
            t,
            ess1_norm: ess1 / trials as f64 / k1 as f64,
            ess2_norm: ess2 / trials as f64 / k2 as f64,
            var1: trace_variance(&v1),
            var2: trace_variance(&v2),
            var_combined: trace_variance(&vc),
        });
    }
    Ok(rows)
}

pub fn write_ess_csv(path: &Path, rows: &[EssSweepRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,ess1_norm,ess2_norm,var1,var2,var_combined")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t, r.ess1_norm, r.ess2_norm, r.var1, r.var2, r.var_combined
        )?;
    }
    Ok(())
}
