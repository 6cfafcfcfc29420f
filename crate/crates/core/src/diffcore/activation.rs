//! Hidden-layer activations and their exact first derivatives.

use serde::{Deserialize, Serialize};

/// Pointwise activation applied to every hidden layer (output layer is linear).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Exact erf form, not the tanh approximation, so finite-difference
    /// checks are clean.
    Gelu,
    Mish,
    Relu,
    Elu,
}

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

// Overflow-safe softplus ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p((-x.abs()).exp())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)),
            Activation::Mish => x * softplus(x).tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
                let pdf = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
                cdf + x * pdf
            }
            Activation::Mish => {
                let th = softplus(x).tanh();
                th + x * (1.0 - th * th) * sigmoid(x)
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }

    pub const ALL: [Activation; 4] = [
        Activation::Gelu,
        Activation::Mish,
        Activation::Relu,
        Activation::Elu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Gelu => "gelu",
            Activation::Mish => "mish",
            Activation::Relu => "relu",
            Activation::Elu => "elu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gelu" => Some(Activation::Gelu),
            "mish" => Some(Activation::Mish),
            "relu" => Some(Activation::Relu),
            "elu" => Some(Activation::Elu),
            _ => None,
        }
    }
}
