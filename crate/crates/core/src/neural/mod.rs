//! Deterministic tensor engine: reverse-mode autodiff, layers, loss,
//! optimizers, layer freezing and checkpoints. Everything runs in `f64`.

pub mod checkpoint;
mod layer;
mod network;
pub mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use layer::{apply_freeze_mask, freeze_tail, Branch, LayerKind, LayerSpec, ModelSpec};
pub use network::{conv2d_forward, dense_forward, Forward, Network};
pub use ops::{matmul, maxpool2d, softmax, weighted_cross_entropy};
pub use optim::{adam_step, sgd_step, Optimizer, OptimizerConfig};
pub use params::{Gradients, LayerGrads, LayerParams, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
