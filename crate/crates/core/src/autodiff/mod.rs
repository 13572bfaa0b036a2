//! Dense tensors with a reverse-mode tape.
//!
//! Values live on a [`Tape`]; every op records its inputs so that
//! [`Tape::backward`] can visit nodes in reverse execution order once.
//! Trainable tensors are kept in a [`ParamStore`] and copied onto the tape
//! for each forward pass.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use param::{ParamId, ParamStore};
pub use tape::{counter_uniform, DropoutKey, Tape, Var};
pub use tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op}: axis {axis} invalid for shape {shape:?}")]
    Axis { op: &'static str, axis: usize, shape: Vec<usize> },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("attention: every key is masked")]
    AllMasked,
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("missing parameter {0}")]
    MissingParam(String),
}
