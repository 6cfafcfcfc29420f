//! Minimal automatic differentiation for small dense MLPs.
//!
//! Everything is 64-bit and allocation-light: a network is a [`ParamSet`]
//! (per-layer weight matrix + bias), and the three evaluation modes are
//! plain functions over it:
//!
//! - [`mlp_forward`] — value only,
//! - [`mlp_jvp`] — forward-mode directional derivative (one tangent),
//! - [`mlp_vjp`] — reverse-mode parameter gradients plus input cotangent.
//!
//! Time/condition inputs enter as plain extra input coordinates; there is no
//! positional embedding (see `MlpSpec` docs).

mod activation;
mod adam;
mod blob;
mod mlp;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use blob::{load_blob, read_blob, save_blob, write_blob};
pub use mlp::{
    mlp_forward, mlp_init, mlp_jvp, mlp_vjp, mlp_vjp_accumulate, DualVector, LayerParams,
    MlpSpec, ParamGradient, ParamSet,
};
