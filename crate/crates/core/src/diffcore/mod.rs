//! A small reverse-mode stack for dense networks: tensors, layers with
//! cached forward passes, pointwise losses, and Adam.
//!
//! Networks are generic over [`Real`]; training uses `f32` storage while
//! losses are always accumulated in `f64`.

mod adam;
pub mod checkpoint;
mod loss;
mod network;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{loss_bce, loss_mse, loss_softmax_ce, softmax, Loss, BCE_EPS};
pub use network::{Activation, ForwardCache, Gradients, Layer, LayerGrads, Network};
pub use tensor::{Real, Tensor};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("cache or state does not match the network")]
    CacheMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
}
