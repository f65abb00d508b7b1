//! Dense `f64` tensors and a reverse-mode autodiff tape.

mod tape;
mod tensor;

pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
