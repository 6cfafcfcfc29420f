//! MLP parameters, forward pass, JVP and VJP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};

/// Architecture of a dense MLP. Hidden layers share one activation; the
/// output layer is linear.
///
/// Condition scalars (the flow times `r`, `t`) are passed as raw extra
/// input coordinates; if an embedding is ever needed it belongs here as a
/// config extension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Self {
        let spec = Self {
            input_dim,
            hidden_widths,
            output_dim,
            activation,
        };
        spec.assert_valid();
        spec
    }

    fn assert_valid(&self) {
        assert!(self.input_dim >= 1, "input_dim must be >= 1");
        assert!(self.output_dim >= 1, "output_dim must be >= 1");
        assert!(!self.hidden_widths.is_empty(), "hidden_widths must be non-empty");
        assert!(
            self.hidden_widths.iter().all(|&w| w >= 1),
            "hidden widths must be >= 1"
        );
    }

    /// (out_dim, in_dim) for every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden_widths {
            dims.push((w, prev));
            prev = w;
        }
        dims.push((self.output_dim, prev));
        dims
    }
}

/// One dense layer: row-major `out_dim x in_dim` weights plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }
}

/// Flat collection of weight matrices and bias vectors: the unit of
/// optimization. Value-semantic; safe to clone and share read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub activation: Activation,
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("at least one layer").in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Reconstructs the owning spec from the stored shapes.
    pub fn spec(&self) -> MlpSpec {
        let hidden = self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim)
            .collect();
        MlpSpec {
            input_dim: self.input_dim(),
            hidden_widths: hidden,
            output_dim: self.output_dim(),
            activation: self.activation,
        }
    }

    fn zeros_like(&self) -> Vec<LayerParams> {
        self.layers
            .iter()
            .map(|l| LayerParams::zeros(l.out_dim, l.in_dim))
            .collect()
    }
}

/// A value vector paired with a tangent of equal length; carries directional
/// derivatives through forward mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub value: Vec<f64>,
    pub tangent: Vec<f64>,
}

impl DualVector {
    pub fn new(value: Vec<f64>, tangent: Vec<f64>) -> Self {
        assert_eq!(value.len(), tangent.len(), "value/tangent length mismatch");
        Self { value, tangent }
    }
}

/// Reverse-mode parameter gradients, shape-matched to a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct ParamGradient {
    pub layers: Vec<LayerParams>,
}

impl ParamGradient {
    pub fn zeros(params: &ParamSet) -> Self {
        Self {
            layers: params.zeros_like(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Accumulate `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &ParamGradient, scale: f64) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer count mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }
}

// Dot product with four accumulators; strict FP order would otherwise serialize
// the reduction and dominate the training-loop cost. chunks_exact keeps the
// inner loop free of bounds checks.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let a_chunks = a.chunks_exact(4);
    let b_chunks = b.chunks_exact(4);
    let tail: f64 = a_chunks
        .remainder()
        .iter()
        .zip(b_chunks.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in a_chunks.zip(b_chunks) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn matvec_bias(layer: &LayerParams, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        layer
            .weights
            .chunks_exact(layer.in_dim)
            .zip(&layer.bias)
            .map(|(row, &b)| b + dot(row, x)),
    );
}

/// Deterministic initialization: weights uniform in
/// `(-sqrt(6/fan_in), sqrt(6/fan_in))`, biases zero.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> ParamSet {
    spec.assert_valid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_dims()
        .into_iter()
        .map(|(out_dim, in_dim)| {
            let bound = (6.0 / in_dim as f64).sqrt();
            let weights = (0..out_dim * in_dim)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            LayerParams {
                in_dim,
                out_dim,
                weights,
                bias: vec![0.0; out_dim],
            }
        })
        .collect();
    ParamSet {
        activation: spec.activation,
        layers,
    }
}

/// Plain forward pass. Pure: identical inputs give bit-identical outputs.
pub fn mlp_forward(params: &ParamSet, input: &[f64]) -> Vec<f64> {
    assert_eq!(input.len(), params.input_dim(), "input dimension mismatch");
    let last = params.layers.len() - 1;
    let mut x = input.to_vec();
    let mut z = Vec::new();
    for (l, layer) in params.layers.iter().enumerate() {
        matvec_bias(layer, &x, &mut z);
        if l < last {
            for v in &mut z {
                *v = params.activation.apply(*v);
            }
        }
        std::mem::swap(&mut x, &mut z);
    }
    x
}

/// Forward-mode pass: value equals `mlp_forward(params, input.value)` and
/// tangent equals `J * input.tangent` with `J` the network Jacobian at the
/// input value.
pub fn mlp_jvp(params: &ParamSet, input: &DualVector) -> DualVector {
    assert_eq!(input.value.len(), input.tangent.len(), "dual length mismatch");
    assert_eq!(input.value.len(), params.input_dim(), "input dimension mismatch");
    let last = params.layers.len() - 1;
    let mut x = input.value.to_vec();
    let mut t = input.tangent.to_vec();
    let mut zx = Vec::new();
    let mut zt = Vec::new();
    for (l, layer) in params.layers.iter().enumerate() {
        // One sweep over the weights for both the value and the tangent.
        zx.clear();
        zt.clear();
        for (row, &b) in layer.weights.chunks_exact(layer.in_dim).zip(&layer.bias) {
            zx.push(b + dot(row, &x));
            zt.push(dot(row, &t));
        }
        if l < last {
            for (v, tv) in zx.iter_mut().zip(zt.iter_mut()) {
                *tv *= params.activation.derivative(*v);
                *v = params.activation.apply(*v);
            }
        }
        std::mem::swap(&mut x, &mut zx);
        std::mem::swap(&mut t, &mut zt);
    }
    DualVector {
        value: x,
        tangent: t,
    }
}

/// Reverse-mode pass: gradients of `<output, cotangent>` with respect to
/// every parameter, plus the input cotangent `J^T * cotangent`.
pub fn mlp_vjp(
    params: &ParamSet,
    input: &[f64],
    output_cotangent: &[f64],
) -> (ParamGradient, Vec<f64>) {
    let mut grad = ParamGradient::zeros(params);
    let input_cot = mlp_vjp_accumulate(params, input, output_cotangent, &mut grad);
    (grad, input_cot)
}

/// Like [`mlp_vjp`], but adds the gradients into `grad` in place. The batch
/// update loops call this once per element to avoid reallocating a full
/// gradient buffer each time.
pub fn mlp_vjp_accumulate(
    params: &ParamSet,
    input: &[f64],
    output_cotangent: &[f64],
    grad: &mut ParamGradient,
) -> Vec<f64> {
    assert_eq!(input.len(), params.input_dim(), "input dimension mismatch");
    assert_eq!(
        output_cotangent.len(),
        params.output_dim(),
        "cotangent dimension mismatch"
    );
    assert_eq!(grad.layers.len(), params.layers.len(), "gradient shape mismatch");
    let last = params.layers.len() - 1;

    // Forward, keeping pre-activations and layer inputs.
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    let mut x = input.to_vec();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = Vec::new();
        matvec_bias(layer, &x, &mut z);
        inputs.push(x);
        preacts.push(z.clone());
        if l < last {
            for v in &mut z {
                *v = params.activation.apply(*v);
            }
        }
        x = z;
    }

    // Backward.
    let mut cot = output_cotangent.to_vec();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        if l < last {
            for (c, &z) in cot.iter_mut().zip(&preacts[l]) {
                *c *= params.activation.derivative(z);
            }
        }
        let glayer = &mut grad.layers[l];
        let layer_in = &inputs[l];
        let mut input_cot = vec![0.0; layer.in_dim];
        for (i, (row, grow)) in layer
            .weights
            .chunks_exact(layer.in_dim)
            .zip(glayer.weights.chunks_exact_mut(layer.in_dim))
            .enumerate()
        {
            let c = cot[i];
            glayer.bias[i] += c;
            for ((g, ic), (&xi, &wi)) in grow
                .iter_mut()
                .zip(input_cot.iter_mut())
                .zip(layer_in.iter().zip(row))
            {
                *g += c * xi;
                *ic += c * wi;
            }
        }
        cot = input_cot;
    }
    cot
}

/// Finiteness guard used by the update routines.
pub(crate) fn ensure_finite_grad(grad: &ParamGradient, context: &'static str) -> Result<()> {
    if grad.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { context })
    }
}
