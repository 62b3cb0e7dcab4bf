//! Dense-tensor math with reverse-mode automatic differentiation and Adam.
//!
//! Everything is 64-bit: the models here are small enough that tight
//! gradient checks are worth more than speed. Checkpoints narrow to 32-bit
//! on disk (see the checkpoint module for the round-trip tolerance).

mod adam;
mod graph;
pub mod kernels;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var};
pub use tensor::Tensor;

/// Epsilon inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;
