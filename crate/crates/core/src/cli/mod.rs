//! Command-line entry points: training runs, evaluation, the 2-D toy
//! pipeline, SNIS/ESS diagnostics, and the self-check suite.
//!
//! Exit codes: 0 success, 1 check or NaN failure, 2 usage/config error.
//! Every command honors `--seed`; all outputs are reproducible under a
//! fixed seed (metrics and CSV files contain no timestamps).

pub mod diag;
pub mod toy;

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::checkpoint::{checkpoint_dir, load_agent, save_agent};
use crate::config::{apply_override, TrainConfig};
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::reference::LinearGaussianOracle;
use crate::selfcheck::{run_selfcheck, FaultInjection};
use crate::stats;
use crate::train::{evaluate_policy, train, MetricsRecord, TrainHooks};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "mfpo",
    version,
    about = "Mean-flow policies with maximum-entropy soft policy iteration",
    after_help = "Files written by `train`: manifest.json (config snapshot, written once \
before training), metrics.jsonl (one record per update: step, critic_loss, policy_loss, \
divnet_loss, alpha, entropy, ess1, ess2, eval_return), checkpoints/, summary.json. \
`toy` writes exact.csv / euler.csv / mfpo.csv with columns x,y,log_likelihood plus \
summary.json. `diag-ess` writes t,ess1_norm,ess2_norm,var1,var2,var_combined."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path overrides, e.g. --set batch_size=64 --set env_params.gmm_std=0.25
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Convenience override for the seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a training job into a run directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (locked for the duration of the run).
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Evaluate a checkpoint with Q-argmax action selection.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment name (gmm_bandit or point_mass).
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Candidate count M for action selection.
        #[arg(long, default_value_t = 10)]
        candidates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on the 2-D GMM bandit and emit the exact/Euler/2-step data sets.
    Toy {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Rows per emitted CSV.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// ESS / variance sweep over flow time for both SNIS proposals.
    DiagEss {
        /// Checkpoint to sweep; mutually exclusive with --oracle.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Sweep the closed-form linear-Gaussian target instead.
        #[arg(long)]
        oracle: bool,
        /// Comma-separated flow times.
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        t_grid: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        k1: usize,
        #[arg(long, default_value_t = 32)]
        k2: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the built-in verification suite.
    Selfcheck,
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn resolve_config(args: &ConfigArgs) -> Result<TrainConfig> {
    let mut value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?
        }
        None => serde_json::to_value(TrainConfig::default())?,
    };
    for spec in &args.overrides {
        apply_override(&mut value, spec)?;
    }
    if let Some(seed) = args.seed {
        apply_override(&mut value, &format!("seed={seed}"))?;
    }
    TrainConfig::from_value(value)
}

struct RunLock {
    path: PathBuf,
}

impl RunLock {
    fn acquire(run_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(run_dir)?;
        let path = run_dir.join("run.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::RunDirLocked(run_dir.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn cmd_train(config_args: &ConfigArgs, run_dir: &Path) -> Result<()> {
    let config = resolve_config(config_args)?;
    let _lock = RunLock::acquire(run_dir)?;

    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "started_unix": now_unix(),
        "config": config,
        "outputs": {
            "metrics": "metrics.jsonl",
            "checkpoints": "checkpoints",
            "summary": "summary.json",
        },
    });
    std::fs::write(run_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;

    let metrics_path = run_dir.join("metrics.jsonl");
    let mut metrics_file = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    let mut on_metrics = |record: &MetricsRecord| -> Result<()> {
        serde_json::to_writer(&mut metrics_file, record)?;
        metrics_file.write_all(b"\n")?;
        Ok(())
    };
    let ckpt_root = run_dir.to_path_buf();
    let mut on_checkpoint = |agent: &crate::train::Agent, rng: &ChaCha8Rng, step: u64| -> Result<()> {
        save_agent(&checkpoint_dir(&ckpt_root, &format!("step_{step:08}")), agent, rng, step)
    };
    let mut hooks = TrainHooks {
        on_metrics: Some(&mut on_metrics),
        on_checkpoint: Some(&mut on_checkpoint),
        dump_dir: Some(run_dir.join("nan_dump")),
    };

    let env_params = config.env_params.clone();
    let env_name = config.env.clone();
    let factory = move || make_env(&env_name, &env_params);
    let result = train(&config, factory, &mut hooks)?;
    drop(hooks);
    metrics_file.flush()?;

    save_agent(
        &checkpoint_dir(run_dir, "final"),
        &result.agent,
        &result.rng,
        result.final_step,
    )?;
    let summary = json!({
        "ended_unix": now_unix(),
        "final_step": result.final_step,
        "num_updates": result.num_updates,
    });
    std::fs::write(run_dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    env_name: &str,
    episodes: usize,
    candidates: usize,
    seed: u64,
) -> Result<()> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    if candidates == 0 {
        return Err(Error::Config("candidates must be positive".into()));
    }
    let loaded = load_agent(checkpoint)?;
    let mut env = make_env(env_name, &crate::envs::EnvParams::default())?;
    let spec = env.spec();
    if spec.state_dim != loaded.agent.policy.state_dim
        || spec.action_dim != loaded.agent.policy.action_dim
    {
        return Err(Error::Config(format!(
            "checkpoint dims ({}, {}) do not match env '{env_name}' dims ({}, {})",
            loaded.agent.policy.state_dim,
            loaded.agent.policy.action_dim,
            spec.state_dim,
            spec.action_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let returns = evaluate_policy(&loaded.agent, env.as_mut(), episodes, candidates, &mut rng)?;
    let report = json!({
        "env": env_name,
        "episodes": episodes,
        "m_candidates": candidates,
        "seed": seed,
        "checkpoint_step": loaded.step,
        "mean_return": stats::mean(&returns),
        "std_return": stats::variance(&returns).sqrt(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_toy(config_args: &ConfigArgs, out_dir: &Path, samples: usize) -> Result<()> {
    let config = match &config_args.config {
        Some(_) => resolve_config(config_args)?,
        None => {
            // The toy preset, still subject to --set/--seed.
            let mut value = serde_json::to_value(TrainConfig::gmm_toy())?;
            for spec in &config_args.overrides {
                apply_override(&mut value, spec)?;
            }
            if let Some(seed) = config_args.seed {
                apply_override(&mut value, &format!("seed={seed}"))?;
            }
            TrainConfig::from_value(value)?
        }
    };
    let summary = toy::run_toy_pipeline(&config, samples, out_dir)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_diag_ess(
    checkpoint: Option<&Path>,
    oracle: bool,
    t_grid: &str,
    trials: usize,
    k1: usize,
    k2: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let grid: Vec<f64> = t_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad t value '{s}' in grid")))
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() || grid.iter().any(|t| !(0.0 < *t && *t < 1.0)) {
        return Err(Error::Config("t grid values must lie strictly in (0, 1)".into()));
    }
    if trials < 2 {
        return Err(Error::Config("trials must be >= 2".into()));
    }
    if k1 == 0 || k2 == 0 {
        return Err(Error::Config("k1 and k2 must be positive for the sweep".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = match (checkpoint, oracle) {
        (Some(_), true) | (None, false) => {
            return Err(Error::Config(
                "pass exactly one of --checkpoint or --oracle".into(),
            ))
        }
        (None, true) => {
            let oracle = LinearGaussianOracle {
                mu: vec![0.5, -0.3],
                sigma2: 4.0,
                alpha: 0.5,
            };
            diag::oracle_ess_sweep(&oracle, &grid, trials, k1, k2, &mut rng)?
        }
        (Some(path), false) => {
            let loaded = load_agent(path)?;
            let state = vec![0.0; loaded.agent.policy.state_dim];
            diag::checkpoint_ess_sweep(&loaded.agent, &state, &grid, trials, k1, k2, &mut rng)?
        }
    };
    diag::write_ess_csv(out, &rows)?;
    Ok(())
}

fn cmd_selfcheck() -> i32 {
    // Test hook: lets the integration suite exercise the failure path
    // end to end without corrupting real numerics.
    let faults = FaultInjection {
        flip_jvp_sign: std::env::var("MFPO_SELFCHECK_FAULT").as_deref() == Ok("flip_jvp_sign"),
    };
    let reports = run_selfcheck(&faults);
    let mut all_passed = true;
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        println!("{status} {} - {}", report.name, report.detail);
        all_passed &= report.passed;
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::RunDirLocked(_) | Error::Checkpoint(_) => EXIT_USAGE,
        Error::Io(_) | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Train { config, run_dir } => cmd_train(config, run_dir),
        Command::Eval {
            checkpoint,
            env,
            episodes,
            candidates,
            seed,
        } => cmd_eval(checkpoint, env, *episodes, *candidates, *seed),
        Command::Toy {
            config,
            out_dir,
            samples,
        } => cmd_toy(config, out_dir, *samples),
        Command::DiagEss {
            checkpoint,
            oracle,
            t_grid,
            trials,
            k1,
            k2,
            out,
            seed,
        } => cmd_diag_ess(
            checkpoint.as_deref(),
            *oracle,
            t_grid,
            *trials,
            *k1,
            *k2,
            out,
            *seed,
        ),
        Command::Selfcheck => return cmd_selfcheck(),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
