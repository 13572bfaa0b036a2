//! Graph encoders and attention blocks built on the autodiff tape.
//!
//! Layers store only [`ParamId`]s. A forward pass first binds every
//! parameter onto the tape with [`Bound::new`] so that shared weights are
//! recorded once per tape.

mod attention;
mod graph;

use crate::autodiff::{ParamId, ParamStore, Real, Tape, Var};

pub use attention::{
    attention, average_heads, BlockOutput, DropCtx, LayerNorm, Linear, MultiHeadAttention, TransformerBlock,
    LAYER_NORM_EPS,
};
pub use graph::{readout, Encoder, EncoderOutput, EncoderStage, GatLayer, GraphBatch, TagcnLayer};

/// Every parameter of a store recorded on one tape.
pub struct Bound<'t, T: Real> {
    vars: Vec<Var<'t, T>>,
}

impl<'t, T: Real> Bound<'t, T> {
    pub fn new(tape: &'t Tape<T>, store: &ParamStore<T>) -> Self {
        Self { vars: store.ids().map(|id| tape.param(store, id)).collect() }
    }

    pub fn get(&self, id: ParamId) -> Var<'t, T> {
        self.vars[id.index()]
    }
}
