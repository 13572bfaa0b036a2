use rand::Rng;

use crate::autodiff::{DropoutKey, ParamId, ParamStore, Real, TensorError, Var};

use super::Bound;

/// `softmax(Q Kᵀ / √d_k) V`. Keys with `valid[j] == false` get weight 0.
/// Returns the output and the `m × n` weight matrix.
pub fn attention<'t, T: Real>(
    q: Var<'t, T>,
    k: Var<'t, T>,
    v: Var<'t, T>,
    valid: Option<&[bool]>,
) -> Result<(Var<'t, T>, Var<'t, T>), TensorError> {
    let dk = q.shape()[1];
    let scores = q.matmul(k.transpose()?)?.scale(1.0 / (dk as f64).sqrt());
    let w = match valid {
        Some(mask) => scores.masked_softmax(mask)?,
        None => scores.softmax(1)?,
    };
    Ok((w.matmul(v)?, w))
}

/// Dropout settings for one forward pass. `stream` separates samples that
/// share a tape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropCtx {
    pub p: f64,
    pub train: bool,
    pub seed: u64,
    pub step: u64,
    pub stream: u64,
}

impl DropCtx {
    pub fn eval() -> Self {
        Self { p: 0.0, train: false, seed: 0, step: 0, stream: 0 }
    }

    fn apply<'t, T: Real>(&self, x: Var<'t, T>, site: u64) -> Var<'t, T> {
        let key = DropoutKey { seed: self.seed, layer: site << 32 | self.stream, step: self.step };
        x.dropout(self.p, self.train, key)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        Ok(Self {
            w: store.add_glorot(format!("{name}.w"), in_dim, out_dim, rng)?,
            b: store.add_zeros(format!("{name}.b"), &[1, out_dim])?,
        })
    }

    pub fn forward<'t, T: Real>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        x.linear(p.get(self.w), Some(p.get(self.b)))
    }
}

/// Layer norm over the feature axis with learned scale and shift.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, dim: usize) -> Result<Self, TensorError> {
        Ok(Self {
            gamma: store.add_full(format!("{name}.gamma"), &[1, dim], 1.0)?,
            beta: store.add_zeros(format!("{name}.beta"), &[1, dim])?,
        })
    }

    pub fn forward<'t, T: Real>(&self, p: &Bound<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        x.layer_norm(1, LAYER_NORM_EPS)?.mul(p.get(self.gamma))?.add(p.get(self.beta))
    }
}

#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub dim: usize,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl MultiHeadAttention {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        if heads == 0 || dim % heads != 0 {
            return Err(TensorError::Shape { op: "multi_head_attention", lhs: vec![dim], rhs: vec![heads] });
        }
        Ok(Self {
            heads,
            dim,
            q: Linear::new(store, &format!("{name}.q"), dim, dim, rng)?,
            k: Linear::new(store, &format!("{name}.k"), dim, dim, rng)?,
            v: Linear::new(store, &format!("{name}.v"), dim, dim, rng)?,
            o: Linear::new(store, &format!("{name}.o"), dim, dim, rng)?,
        })
    }

    /// Output `m × d` and one `m × n` weight matrix per head.
    pub fn forward<'t, T: Real>(
        &self,
        p: &Bound<'t, T>,
        xq: Var<'t, T>,
        xkv: Var<'t, T>,
        valid: Option<&[bool]>,
    ) -> Result<(Var<'t, T>, Vec<Var<'t, T>>), TensorError> {
        let q = self.q.forward(p, xq)?;
        let k = self.k.forward(p, xkv)?;
        let v = self.v.forward(p, xkv)?;
        let dk = self.dim / self.heads;
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (o, w) = attention(q.slice(1, h * dk, dk)?, k.slice(1, h * dk, dk)?, v.slice(1, h * dk, dk)?, valid)?;
            outs.push(o);
            weights.push(w);
        }
        let tape = xq.tape();
        let joined = if outs.len() == 1 { outs[0] } else { tape.concat(&outs, 1)? };
        Ok((self.o.forward(p, joined)?, weights))
    }
}

/// Pre-norm block: `y = x + MHA(LN(x), LN(kv))`, then `y + FFN(LN(y))`.
/// Without external keys it is a self-attention block.
#[derive(Clone, Debug)]
pub struct TransformerBlock {
    pub ln_q: LayerNorm,
    pub ln_kv: LayerNorm,
    pub mha: MultiHeadAttention,
    pub ln_ff: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub site: u64,
}

pub struct BlockOutput<'t, T: Real> {
    pub out: Var<'t, T>,
    pub head_weights: Vec<Var<'t, T>>,
}

impl TransformerBlock {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        ffn_mult: usize,
        site: u64,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        Ok(Self {
            ln_q: LayerNorm::new(store, &format!("{name}.ln_q"), dim)?,
            ln_kv: LayerNorm::new(store, &format!("{name}.ln_kv"), dim)?,
            mha: MultiHeadAttention::new(store, &format!("{name}.attn"), dim, heads, rng)?,
            ln_ff: LayerNorm::new(store, &format!("{name}.ln_ff"), dim)?,
            ff1: Linear::new(store, &format!("{name}.ff1"), dim, ffn_mult * dim, rng)?,
            ff2: Linear::new(store, &format!("{name}.ff2"), ffn_mult * dim, dim, rng)?,
            site,
        })
    }

    pub fn forward<'t, T: Real>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        kv: Option<(Var<'t, T>, Option<&[bool]>)>,
        drop: &DropCtx,
    ) -> Result<BlockOutput<'t, T>, TensorError> {
        let xq = self.ln_q.forward(p, x)?;
        let (attn, head_weights) = match kv {
            Some((kv, valid)) => {
                let xkv = self.ln_kv.forward(p, kv)?;
                self.mha.forward(p, xq, xkv, valid)?
            }
            None => self.mha.forward(p, xq, xq, None)?,
        };
        let y = x.add(drop.apply(attn, 2 * self.site))?;
        let h = self.ff1.forward(p, self.ln_ff.forward(p, y)?)?.relu();
        let f = self.ff2.forward(p, h)?;
        let out = y.add(drop.apply(f, 2 * self.site + 1))?;
        Ok(BlockOutput { out, head_weights })
    }
}

/// Element-wise mean of equally shaped head weight matrices, as plain values.
pub fn average_heads<T: Real>(weights: &[Var<'_, T>]) -> Vec<Vec<f64>> {
    let first = weights[0].value();
    let (m, n) = first.dims2().expect("attention weights are 2-D");
    let mut avg = vec![vec![0.0; n]; m];
    for w in weights {
        let w = w.value();
        for (i, row) in avg.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += w.at2(i, j).to_f64_lossy();
            }
        }
    }
    let h = weights.len() as f64;
    avg.iter_mut().flatten().for_each(|v| *v /= h);
    avg
}
