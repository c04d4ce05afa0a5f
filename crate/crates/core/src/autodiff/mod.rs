//! Reverse-mode automatic differentiation over dense 64-bit matrices.

mod checkpoint;
pub mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{optimizer_path, sidecar_path, Checkpoint, Sidecar};
pub use optim::{adam_step, clip_global_norm, cosine_lr, global_norm, AdamState, BETA1, BETA2, EPSILON};
pub use tape::{Axis, Csr, Gradients, Tape, Var, NONE};
pub use tensor::Tensor;
