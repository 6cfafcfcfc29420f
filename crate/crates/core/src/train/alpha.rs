//! Entropy-temperature state and its auto-tuning update.

use serde::{Deserialize, Serialize};

/// Temperature parameterized through `log_alpha`, so `alpha > 0` always.
/// The target entropy is `-rho * dim(A)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlphaState {
    pub log_alpha: f64,
    pub learning_rate: f64,
    pub target_entropy: f64,
}

impl AlphaState {
    pub fn new(initial_alpha: f64, learning_rate: f64, target_entropy: f64) -> Self {
        assert!(initial_alpha > 0.0, "alpha must be positive");
        Self {
            log_alpha: initial_alpha.ln(),
            learning_rate,
            target_entropy,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }
}

/// One gradient step on `L(alpha) = alpha (H - H_target)` in `log_alpha`:
/// `dL/dlog_alpha = alpha (H - H_target)`, so the temperature falls when the
/// entropy estimate exceeds the target and rises when it is below.
pub fn temperature_update(state: &AlphaState, entropy_estimate: f64) -> AlphaState {
    let gradient = state.alpha() * (entropy_estimate - state.target_entropy);
    AlphaState {
        log_alpha: state.log_alpha - state.learning_rate * gradient,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_at_target_leaves_alpha_unchanged() {
        let state = AlphaState::new(0.2, 3e-4, -1.0);
        let next = temperature_update(&state, -1.0);
        assert_eq!(next.log_alpha, state.log_alpha);
    }

    #[test]
    fn entropy_above_target_decreases_alpha() {
        let state = AlphaState::new(0.2, 3e-4, -1.0);
        let next = temperature_update(&state, 0.5);
        assert!(next.alpha() < state.alpha());
        assert!(next.alpha() > 0.0);
    }

    #[test]
    fn constant_entropy_gap_moves_log_alpha_monotonically() {
        // Iterating the stated recurrence with H - H_target = +1 must
        // decrease log_alpha every step, by lr * alpha_k each time.
        let mut state = AlphaState::new(1.0, 1e-2, -1.0);
        let mut last = state.log_alpha;
        for _ in 0..100 {
            let expected = last - state.learning_rate * state.alpha() * 1.0;
            state = temperature_update(&state, 0.0);
            assert!(state.log_alpha < last);
            assert!((state.log_alpha - expected).abs() < 1e-15);
            last = state.log_alpha;
        }
    }
}
