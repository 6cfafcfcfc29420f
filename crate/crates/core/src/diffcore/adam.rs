//! Bias-corrected Adam over a [`ParamSet`].

use serde::{Deserialize, Serialize};

use super::mlp::{ensure_finite_grad, LayerParams, ParamGradient, ParamSet};
use crate::error::Result;

/// Optimizer state: first/second moment accumulators shaped like the
/// parameters, plus the step counter and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<LayerParams>,
    v: Vec<LayerParams>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// Serializable hyperparameter block (the moments are rebuilt from shapes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamState {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        Self::with_config(
            params,
            AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
        )
    }

    pub fn with_config(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.out_dim, l.in_dim))
                .collect::<Vec<_>>()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }
}

/// One Adam update. Rejects non-finite gradients without touching the
/// parameters or the moments.
pub fn adam_step(state: &mut AdamState, params: &mut ParamSet, grads: &ParamGradient) -> Result<()> {
    assert_eq!(state.m.len(), params.layers.len(), "optimizer/params layer mismatch");
    assert_eq!(grads.layers.len(), params.layers.len(), "grads/params layer mismatch");
    ensure_finite_grad(grads, "adam_step")?;

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.learning_rate;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    for ((pl, gl), (ml, vl)) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(pl.weights.len(), gl.weights.len(), "weight shape mismatch");
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for i in 0..pl.weights.len() {
            update(&mut pl.weights[i], gl.weights[i], &mut ml.weights[i], &mut vl.weights[i]);
        }
        for i in 0..pl.bias.len() {
            update(&mut pl.bias[i], gl.bias[i], &mut ml.bias[i], &mut vl.bias[i]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{mlp_init, Activation, MlpSpec};

    fn setup() -> (ParamSet, AdamState) {
        let spec = MlpSpec::new(2, vec![3], 1, Activation::Relu);
        let params = mlp_init(&spec, 9);
        let state = AdamState::new(&params, 1e-2);
        (params, state)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (mut params, mut state) = setup();
        let before = params.clone();
        let grads = ParamGradient::zeros(&params);
        adam_step(&mut state, &mut params, &grads).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_matches_hand_computed_recurrence() {
        let (mut params, mut state) = setup();
        let w0 = params.layers[0].weights[0];
        let mut grads = ParamGradient::zeros(&params);
        let g = 0.37;
        grads.layers[0].weights[0] = g;
        adam_step(&mut state, &mut params, &grads).unwrap();
        // m1 = (1-b1) g, v1 = (1-b2) g^2; after bias correction m_hat = g,
        // v_hat = g^2, so the step is -lr * g / (|g| + eps).
        let expected = w0 - state.learning_rate * g / (g.abs() + state.epsilon);
        assert!((params.layers[0].weights[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn update_is_deterministic() {
        let (params0, state0) = setup();
        let mut grads = ParamGradient::zeros(&params0);
        grads.layers[0].weights[1] = -0.5;
        grads.layers[1].bias[0] = 0.25;

        let run = || {
            let mut p = params0.clone();
            let mut s = state0.clone();
            adam_step(&mut s, &mut p, &grads).unwrap();
            adam_step(&mut s, &mut p, &grads).unwrap();
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_rejected_and_params_untouched() {
        let (mut params, mut state) = setup();
        let before = params.clone();
        let mut grads = ParamGradient::zeros(&params);
        grads.layers[0].weights[0] = f64::NAN;
        let err = adam_step(&mut state, &mut params, &grads);
        assert!(err.is_err());
        assert_eq!(params, before);
        assert_eq!(state.step, 0);
    }
}
