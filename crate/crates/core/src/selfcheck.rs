//! Built-in verification suite: gradient checks against central
//! differences, trace-estimator checks against exact Jacobian traces,
//! projection checks against a brute-force oracle, and a Gaussian-flow
//! likelihood check on freshly trained nets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::critic::{project_categorical, uniform_atoms, ReturnDistribution};
use crate::diffcore::{mlp_forward, mlp_init, mlp_jvp, mlp_vjp, Activation, DualVector, MlpSpec};
use crate::divnet::{exhaustive_rademacher_probes, hutchinson_divergence, sample_probes, ProbeKind};
use crate::meanflow::sample_action;
use crate::reference::{
    mmd_gaussian, train_gaussian_flow_divnet, train_gaussian_flow_policy, FlowFitConfig,
    LinearVelocityField,
};
use crate::stats;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Test hook: deliberately corrupts a check's inputs so the failure path is
/// exercisable. Production callers pass `Default::default()`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultInjection {
    pub flip_jvp_sign: bool,
}

fn gradient_check(faults: &FaultInjection) -> CheckReport {
    let mut worst_jvp = 0.0f64;
    let mut worst_vjp = 0.0f64;
    for (i, act) in Activation::ALL.into_iter().enumerate() {
        let spec = MlpSpec::new(3, vec![6, 5], 2, act);
        let params = mlp_init(&spec, 101 + i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i as u64);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tangent: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cot: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-5;

        let jvp = mlp_jvp(&params, &DualVector::new(x.clone(), tangent.clone()));
        let sign = if faults.flip_jvp_sign { -1.0 } else { 1.0 };
        let xp: Vec<f64> = x.iter().zip(&tangent).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&tangent).map(|(a, b)| a - h * b).collect();
        let fp = mlp_forward(&params, &xp);
        let fm = mlp_forward(&params, &xm);
        for j in 0..2 {
            let fd = (fp[j] - fm[j]) / (2.0 * h);
            let rel = (sign * jvp.tangent[j] - fd).abs() / fd.abs().max(1e-3);
            worst_jvp = worst_jvp.max(rel);
        }

        let (grad, _) = mlp_vjp(&params, &x, &cot);
        let loss = |p: &crate::diffcore::ParamSet| -> f64 {
            mlp_forward(p, &x).iter().zip(&cot).map(|(y, c)| y * c).sum()
        };
        for l in 0..params.layers.len() {
            for k in 0..params.layers[l].weights.len() {
                let mut up = params.clone();
                up.layers[l].weights[k] += h;
                let mut dn = params.clone();
                dn.layers[l].weights[k] -= h;
                let fd = (loss(&up) - loss(&dn)) / (2.0 * h);
                let rel = (grad.layers[l].weights[k] - fd).abs() / fd.abs().max(1e-3);
                worst_vjp = worst_vjp.max(rel);
            }
        }
    }
    let passed = worst_jvp <= 1e-6 && worst_vjp <= 1e-5;
    CheckReport {
        name: "gradient_check",
        passed,
        detail: format!("worst jvp rel err {worst_jvp:.2e}, worst vjp rel err {worst_vjp:.2e}"),
    }
}

fn trace_oracle_check() -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(8_000);
    let mut worst = 0.0f64;
    for dim in 1..=6 {
        let matrix: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let field = LinearVelocityField { dim, matrix };
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let est = hutchinson_divergence(&field, &[], &a, 0.5, &exhaustive_rademacher_probes(dim));
        worst = worst.max((est.value - field.trace()).abs());
    }
    // Gaussian-probe unbiasedness on a fixed 4-D field.
    let dim = 4;
    let matrix: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let field = LinearVelocityField { dim, matrix };
    let n = 20_000;
    let mut values = Vec::with_capacity(n);
    let a = vec![0.0; dim];
    for _ in 0..n {
        let probes = sample_probes(&mut rng, ProbeKind::Gaussian, 1, dim);
        values.push(hutchinson_divergence(&field, &[], &a, 0.5, &probes).value);
    }
    let mean = stats::mean(&values);
    let se = (stats::variance(&values) / n as f64).sqrt();
    let gauss_ok = (mean - field.trace()).abs() <= 4.0 * se;
    let passed = worst <= 1e-9 && gauss_ok;
    CheckReport {
        name: "trace_oracle",
        passed,
        detail: format!(
            "exhaustive worst abs err {worst:.2e}; gaussian mean {mean:.4} vs trace {:.4} (se {se:.4})",
            field.trace()
        ),
    }
}

fn projection_oracle_check() -> CheckReport {
    let atoms = uniform_atoms(21, -4.0, 4.0);
    let spacing = atoms[1] - atoms[0];
    let mut rng = ChaCha8Rng::seed_from_u64(9_000);
    let mut worst = 0.0f64;
    let mut worst_mass = 0.0f64;
    for _ in 0..200 {
        let shifted: Vec<f64> = (0..21).map(|_| rng.random_range(-6.0..6.0)).collect();
        let raw: Vec<f64> = (0..21).map(|_| rng.random_range(0.0..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
        let fast = project_categorical(
            &atoms,
            &shifted,
            &ReturnDistribution {
                probabilities: probs.clone(),
            },
        );
        // Brute force: per support atom, accumulate overlapping mass.
        for (k, &z) in atoms.iter().enumerate() {
            let mut direct = 0.0;
            for (&tz, &p) in shifted.iter().zip(&probs) {
                let tz = tz.clamp(atoms[0], atoms[20]);
                let dist = (tz - z).abs();
                if dist < spacing {
                    direct += p * (1.0 - dist / spacing);
                }
            }
            worst = worst.max((fast.probabilities[k] - direct).abs());
        }
        let total: f64 = fast.probabilities.iter().sum();
        worst_mass = worst_mass.max((total - 1.0).abs());
    }
    let passed = worst <= 1e-12 && worst_mass <= 1e-9;
    CheckReport {
        name: "projection_oracle",
        passed,
        detail: format!("worst atom err {worst:.2e}, worst mass defect {worst_mass:.2e}"),
    }
}

fn gaussian_flow_check() -> CheckReport {
    let dim = 2;
    let config = FlowFitConfig {
        steps: 2500,
        batch_size: 128,
        hidden_widths: vec![48, 48],
        ..FlowFitConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let policy = match train_gaussian_flow_policy(dim, &config, 31, &mut rng) {
        Ok(p) => p,
        Err(e) => {
            return CheckReport {
                name: "gaussian_flow_likelihood",
                passed: false,
                detail: format!("policy fit failed: {e}"),
            }
        }
    };
    let divnet = match train_gaussian_flow_divnet(&policy, &config, ProbeKind::Gaussian, 32, &mut rng) {
        Ok(d) => d,
        Err(e) => {
            return CheckReport {
                name: "gaussian_flow_likelihood",
                passed: false,
                detail: format!("divnet fit failed: {e}"),
            }
        }
    };

    // Two-step samples against the exact standard normal: likelihood error
    // and a light MMD check.
    let n = 1000;
    let mut abs_err = 0.0;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        match sample_action(&policy, &divnet, &[], 2, &mut rng) {
            Ok(out) => {
                abs_err += (out.log_likelihood - stats::standard_normal_logpdf(&out.action)).abs();
                samples.push(out.action);
            }
            Err(e) => {
                return CheckReport {
                    name: "gaussian_flow_likelihood",
                    passed: false,
                    detail: format!("sampling failed: {e}"),
                }
            }
        }
    }
    let mae = abs_err / n as f64;
    let reference: Vec<Vec<f64>> = (0..n).map(|_| stats::draw_standard_normal(&mut rng, dim)).collect();
    let mmd = mmd_gaussian(&samples, &reference, 1.0);
    let passed = mae <= 0.15 && mmd <= 0.08;
    CheckReport {
        name: "gaussian_flow_likelihood",
        passed,
        detail: format!("loglik mae {mae:.3} nats (limit 0.15), mmd {mmd:.3} (limit 0.08)"),
    }
}

/// Runs every check and reports one line each.
pub fn run_selfcheck(faults: &FaultInjection) -> Vec<CheckReport> {
    vec![
        gradient_check(faults),
        trace_oracle_check(),
        projection_oracle_check(),
        gaussian_flow_check(),
    ]
}
