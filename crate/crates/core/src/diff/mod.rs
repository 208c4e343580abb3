//! Dense 2-D tensors, a reverse-mode tape and the AdamW optimizer.
//!
//! Just enough to train small MLPs and stitching layers in 64-bit floats.
//! Every tape operation checks that its output is finite.

mod adam;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use tape::{bce, sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;
