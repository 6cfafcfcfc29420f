//! Small numeric helpers shared across modules.

use rand::Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.8378770664093453;

/// log N(x; 0, I)
pub fn standard_normal_logpdf(x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * (x.len() as f64 * LN_2PI + sq)
}

/// log N(x; mean, std^2 I)
pub fn isotropic_normal_logpdf(x: &[f64], mean: &[f64], std: f64) -> f64 {
    debug_assert_eq!(x.len(), mean.len());
    let sq: f64 = x
        .iter()
        .zip(mean)
        .map(|(a, m)| {
            let d = (a - m) / std;
            d * d
        })
        .sum();
    -0.5 * (x.len() as f64 * LN_2PI + sq) - x.len() as f64 * std.ln()
}

pub fn draw_standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logpdf_matches_direct_formula() {
        let x = [0.3, -1.2];
        let direct = (-0.5 * (0.09 + 1.44) - LN_2PI).exp();
        assert!((standard_normal_logpdf(&x).exp() - direct).abs() < 1e-15);
    }

    #[test]
    fn isotropic_reduces_to_standard() {
        let x = [0.5, 0.1, -2.0];
        let zero = [0.0; 3];
        assert!(
            (isotropic_normal_logpdf(&x, &zero, 1.0) - standard_normal_logpdf(&x)).abs() < 1e-14
        );
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert!((log_sum_exp(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let shifted = log_sum_exp(&[1000.0, 1000.0]);
        assert!((shifted - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
