use std::rc::Rc;

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Real, Tape, Tensor, TensorError, Var};
use crate::featurize::{GraphSample, FEATURE_DIM};

use super::Bound;

/// Several graphs stacked as one disjoint union. Node rows of graph `g` are
/// `offsets[g]..offsets[g + 1]`.
#[derive(Clone, Debug)]
pub struct GraphBatch<T> {
    pub features: Tensor<T>,
    pub offsets: Rc<[usize]>,
    /// Entries of `D^-1/2 (A + I) D^-1/2`: `out[rows[k]] += weights[k] * x[cols[k]]`.
    pub prop_rows: Rc<[usize]>,
    pub prop_cols: Rc<[usize]>,
    pub prop_weights: Tensor<T>,
    /// Attention edges `center <- neighbor`, self-loops included.
    pub att_center: Rc<[usize]>,
    pub att_neighbor: Rc<[usize]>,
}

impl<T: Real> GraphBatch<T> {
    /// `graphs` lists `(node count, local edges)` in row order of `features`.
    pub fn new(features: Tensor<T>, graphs: &[(usize, &[(u32, u32)])]) -> Result<Self, TensorError> {
        let total: usize = graphs.iter().map(|g| g.0).sum();
        match features.dims2() {
            Some((n, _)) if n == total && total > 0 => {}
            _ => return Err(TensorError::Shape { op: "graph_batch", lhs: features.shape().to_vec(), rhs: vec![total] }),
        }
        let mut offsets = vec![0];
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
        for &(n, edges) in graphs {
            if n == 0 {
                return Err(TensorError::Empty("graph_batch"));
            }
            let base = *offsets.last().unwrap();
            for &(a, b) in edges {
                let (a, b) = (a as usize, b as usize);
                if a >= n || b >= n || a == b {
                    return Err(TensorError::Shape { op: "graph_batch", lhs: vec![a, b], rhs: vec![n] });
                }
                adj[base + a].push(base + b);
                adj[base + b].push(base + a);
            }
            offsets.push(base + n);
        }
        for list in &mut adj {
            list.push(usize::MAX);
            list.sort_unstable();
            list.dedup();
            list.pop();
        }
        let deg: Vec<f64> = adj.iter().map(|l| l.len() as f64 + 1.0).collect();
        let (mut rows, mut cols, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (i, list) in adj.iter().enumerate() {
            // self-loop first, then neighbors ascending
            for j in std::iter::once(i).chain(list.iter().copied()) {
                rows.push(i);
                cols.push(j);
                w.push(T::of(1.0 / (deg[i] * deg[j]).sqrt()));
            }
        }
        let n_entries = w.len();
        Ok(Self {
            features,
            offsets: offsets.into(),
            att_center: rows.clone().into(),
            att_neighbor: cols.clone().into(),
            prop_rows: rows.into(),
            prop_cols: cols.into(),
            prop_weights: Tensor::new(vec![n_entries], w)?,
        })
    }

    pub fn from_samples(samples: &[&GraphSample]) -> Result<Self, TensorError> {
        let total: usize = samples.iter().map(|s| s.num_nodes).sum();
        let data: Vec<T> = samples.iter().flat_map(|s| s.features.iter().map(|&v| T::of(v as f64))).collect();
        let features = Tensor::new(vec![total, FEATURE_DIM], data)?;
        let parts: Vec<(usize, &[(u32, u32)])> = samples.iter().map(|s| (s.num_nodes, s.edges.as_slice())).collect();
        Self::new(features, &parts)
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

/// `Σ_{k=0..K} Â^k X W_k + b`, with `Â` applied by sparse propagation.
#[derive(Clone, Debug)]
pub struct TagcnLayer {
    pub hops: usize,
    pub weights: Vec<ParamId>,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl TagcnLayer {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        hops: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        if hops < 1 {
            return Err(TensorError::Empty("tagcn hops"));
        }
        let weights =
            (0..=hops).map(|k| store.add_glorot(format!("{name}.w{k}"), in_dim, out_dim, rng)).collect::<Result<_, _>>()?;
        let bias = store.add_zeros(format!("{name}.b"), &[1, out_dim])?;
        Ok(Self { hops, weights, bias, in_dim, out_dim })
    }

    pub fn forward<'t, T: Real>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        batch: &GraphBatch<T>,
        prop: Var<'t, T>,
    ) -> Result<Var<'t, T>, TensorError> {
        let n = batch.num_nodes();
        let mut h = x;
        let mut acc = h.matmul(p.get(self.weights[0]))?;
        for k in 1..=self.hops {
            h = h.spmm(prop, batch.prop_rows.clone(), batch.prop_cols.clone(), n)?;
            acc = acc.add(h.matmul(p.get(self.weights[k]))?)?;
        }
        acc.add(p.get(self.bias))
    }
}

/// Single-head graph attention over `N(i) ∪ {i}`.
#[derive(Clone, Debug)]
pub struct GatLayer {
    pub weight: ParamId,
    /// `[a_center; a_neighbor]`, shape `2·out × 1`.
    pub attn: ParamId,
    pub slope: f64,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl GatLayer {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        let weight = store.add_glorot(format!("{name}.w"), in_dim, out_dim, rng)?;
        let attn = store.add_glorot(format!("{name}.a"), 2 * out_dim, 1, rng)?;
        Ok(Self { weight, attn, slope, in_dim, out_dim })
    }

    /// Returns the node outputs and the attention coefficient of every
    /// `(att_center[k], att_neighbor[k])` edge.
    pub fn forward<'t, T: Real>(
        &self,
        p: &Bound<'t, T>,
        x: Var<'t, T>,
        batch: &GraphBatch<T>,
    ) -> Result<(Var<'t, T>, Var<'t, T>), TensorError> {
        let z = x.matmul(p.get(self.weight))?;
        let a = p.get(self.attn);
        let s_center = z.matmul(a.slice(0, 0, self.out_dim)?)?;
        let s_neighbor = z.matmul(a.slice(0, self.out_dim, self.out_dim)?)?;
        let e = s_center
            .gather_rows(batch.att_center.clone())?
            .add(s_neighbor.gather_rows(batch.att_neighbor.clone())?)?
            .leaky_relu(self.slope);
        let alpha = e.segment_softmax(batch.att_center.clone(), batch.num_nodes())?;
        let out = z.spmm(alpha, batch.att_center.clone(), batch.att_neighbor.clone(), batch.num_nodes())?;
        Ok((out, alpha))
    }
}

/// Per-graph mean of node rows.
pub fn readout<'t, T: Real>(h: Var<'t, T>, batch: &GraphBatch<T>) -> Result<Var<'t, T>, TensorError> {
    h.segment_mean(batch.offsets.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderStage {
    Tagcn,
    Relu,
    Gat,
    Elu,
    Readout,
}

/// TAGCN → ReLU → TAGCN → ReLU → GAT → ELU → mean readout.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub tagcn: [TagcnLayer; 2],
    pub gat: GatLayer,
}

pub struct EncoderOutput<'t, T: Real> {
    /// One row per graph.
    pub graphs: Var<'t, T>,
    pub nodes: Var<'t, T>,
    pub gat_alpha: Var<'t, T>,
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        hops: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, TensorError> {
        let t0 = TagcnLayer::new(store, &format!("{name}.tagcn0"), in_dim, hidden, hops, rng)?;
        let t1 = TagcnLayer::new(store, &format!("{name}.tagcn1"), hidden, hidden, hops, rng)?;
        let gat = GatLayer::new(store, &format!("{name}.gat"), hidden, out_dim, slope, rng)?;
        Ok(Self { tagcn: [t0, t1], gat })
    }

    pub fn stages(&self) -> [EncoderStage; 7] {
        use EncoderStage::*;
        [Tagcn, Relu, Tagcn, Relu, Gat, Elu, Readout]
    }

    pub fn forward<'t, T: Real>(
        &self,
        tape: &'t Tape<T>,
        p: &Bound<'t, T>,
        batch: &GraphBatch<T>,
    ) -> Result<EncoderOutput<'t, T>, TensorError> {
        let prop = tape.constant(batch.prop_weights.clone());
        let x = tape.constant(batch.features.clone());
        let h = self.tagcn[0].forward(p, x, batch, prop)?.relu();
        let h = self.tagcn[1].forward(p, h, batch, prop)?.relu();
        let (h, gat_alpha) = self.gat.forward(p, h, batch)?;
        let nodes = h.elu(1.0);
        Ok(EncoderOutput { graphs: readout(nodes, batch)?, nodes, gat_alpha })
    }
}
