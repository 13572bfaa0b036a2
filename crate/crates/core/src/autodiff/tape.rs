use std::cell::RefCell;
use std::rc::Rc;

use super::param::{ParamId, ParamStore};
use super::tensor::{
    broadcast_map, broadcast_shape, matmul_into, matmul_nt_into, matmul_tn_into, split_axis, Real,
    Tensor,
};
use super::TensorError;

/// Identifies a dropout site. The keep mask is a pure function of
/// `(seed, layer, step, element index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub layer: u64,
    pub step: u64,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    AddScalar(usize),
    Transpose(usize),
    Reshape(usize),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Sum { input: usize, axis: usize },
    SumAll(usize),
    Softmax { input: usize, axis: usize },
    MaskedSoftmax(usize),
    Relu(usize),
    LeakyRelu(usize, T),
    Elu(usize, T),
    Exp(usize),
    Log(usize),
    Sigmoid(usize),
    LayerNorm { input: usize, axis: usize, rstd: Vec<T> },
    Dropout { input: usize, mask: Vec<T> },
    MaskedFill { input: usize, mask: Rc<[bool]> },
    Spmm { weights: usize, x: usize, rows: Rc<[usize]>, cols: Rc<[usize]> },
    GatherRows { input: usize, idx: Rc<[usize]> },
    SegmentSoftmax { input: usize, seg: Rc<[usize]>, n_seg: usize },
    SegmentMean { input: usize, offsets: Rc<[usize]> },
    BceWithLogits { input: usize, targets: Vec<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// Reverse-mode tape. Node ids are assigned in execution order, which is a
/// topological order of the recorded graph.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<Vec<(usize, ParamId)>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Real> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Real> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, {:?})", self.id, self.shape())
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    /// Records a trainable parameter; [`Tape::accumulate_param_grads`] routes
    /// its gradient back into `store`.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var<'_, T> {
        let v = self.leaf(store.value(id).clone(), true);
        self.params.borrow_mut().push((v.id, id));
        v
    }

    pub fn value(&self, v: Var<'_, T>) -> Tensor<T> {
        self.nodes.borrow()[v.id].value.clone()
    }

    /// Accumulated gradient of a `requires_grad` leaf.
    pub fn grad(&self, v: Var<'_, T>) -> Option<Tensor<T>> {
        let nodes = self.nodes.borrow();
        let node = &nodes[v.id];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    /// Adds the gradients of every parameter leaf into `store`'s gradient buffers.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<T>) {
        let nodes = self.nodes.borrow();
        for &(node_id, pid) in self.params.borrow().iter() {
            if let Some(g) = &nodes[node_id].grad {
                for (acc, &x) in store.grad_mut(pid).data_mut().iter_mut().zip(g) {
                    *acc = *acc + x;
                }
            }
        }
    }

    pub fn concat(&self, vars: &[Var<'_, T>], axis: usize) -> Result<Var<'_, T>, TensorError> {
        let nodes = self.nodes.borrow();
        let first = nodes[vars.first().ok_or(TensorError::Empty("concat"))?.id]
            .value
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(TensorError::Axis { op: "concat", axis, shape: first });
        }
        let mut out_shape = first.clone();
        out_shape[axis] = 0;
        for v in vars {
            let s = nodes[v.id].value.shape();
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(TensorError::Shape { op: "concat", lhs: first, rhs: s.to_vec() });
            }
            out_shape[axis] += s[axis];
        }
        let (outer, total, inner) = split_axis(&out_shape, axis);
        let mut data = vec![T::zero(); outer * total * inner];
        let mut offset = 0;
        for v in vars {
            let src = nodes[v.id].value.data();
            let len = nodes[v.id].value.shape()[axis];
            for o in 0..outer {
                let dst = (o * total + offset) * inner;
                data[dst..dst + len * inner].copy_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
            }
            offset += len;
        }
        let rg = vars.iter().any(|v| nodes[v.id].requires_grad);
        drop(nodes);
        let op = Op::Concat { inputs: vars.iter().map(|v| v.id).collect(), axis };
        Ok(self.push(Tensor::new(out_shape, data)?, op, rg))
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        debug_assert!(value.all_finite(), "non-finite value produced by {op:?}");
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad, grad: None });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn rg(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Back-propagates from a scalar `loss`. Leaf gradients accumulate across calls.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<(), TensorError> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.id].value.numel() != 1 {
            return Err(TensorError::NonScalarLoss(nodes[loss.id].value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(vec![T::one()]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !nodes[id].requires_grad {
                continue;
            }
            if let Op::Leaf = nodes[id].op {
                let node = &mut nodes[id];
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &x)| *a = *a + x),
                    None => node.grad = Some(g),
                }
                continue;
            }
            propagate(&nodes, id, &g, &mut grads);
        }
        Ok(())
    }
}

fn acc_buf<'g, T: Real>(
    nodes: &[Node<T>],
    grads: &'g mut [Option<Vec<T>>],
    id: usize,
) -> Option<&'g mut Vec<T>> {
    if !nodes[id].requires_grad {
        return None;
    }
    let n = nodes[id].value.numel();
    Some(grads[id].get_or_insert_with(|| vec![T::zero(); n]))
}

fn propagate<T: Real>(nodes: &[Node<T>], id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let out = &nodes[id].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = nodes[*a].value.dims2().unwrap();
            let n = nodes[*b].value.shape()[1];
            if let Some(da) = acc_buf(nodes, grads, *a) {
                matmul_nt_into(g, nodes[*b].value.data(), da, m, n, k);
            }
            if let Some(db) = acc_buf(nodes, grads, *b) {
                matmul_tn_into(nodes[*a].value.data(), g, db, m, k, n);
            }
        }
        Op::Add(a, b) | Op::Sub(a, b) => {
            let sign = if matches!(nodes[id].op, Op::Sub(..)) { -T::one() } else { T::one() };
            for (input, s) in [(*a, T::one()), (*b, sign)] {
                let in_shape = nodes[input].value.shape().to_vec();
                if let Some(d) = acc_buf(nodes, grads, input) {
                    if in_shape == out.shape() {
                        d.iter_mut().zip(g).for_each(|(x, &gv)| *x = *x + s * gv);
                    } else {
                        for (i, j) in broadcast_map(&in_shape, out.shape()).into_iter().enumerate() {
                            d[j] = d[j] + s * g[i];
                        }
                    }
                }
            }
        }
        Op::Mul(a, b) => {
            for (input, other) in [(*a, *b), (*b, *a)] {
                let in_shape = nodes[input].value.shape().to_vec();
                let other_val = &nodes[other].value;
                if let Some(d) = acc_buf(nodes, grads, input) {
                    let om = broadcast_map(other_val.shape(), out.shape());
                    if in_shape == out.shape() {
                        for i in 0..g.len() {
                            d[i] = d[i] + g[i] * other_val.data()[om[i]];
                        }
                    } else {
                        for (i, j) in broadcast_map(&in_shape, out.shape()).into_iter().enumerate() {
                            d[j] = d[j] + g[i] * other_val.data()[om[i]];
                        }
                    }
                }
            }
        }
        Op::Scale(a, c) => {
            if let Some(d) = acc_buf(nodes, grads, *a) {
                d.iter_mut().zip(g).for_each(|(x, &gv)| *x = *x + *c * gv);
            }
        }
        Op::AddScalar(a) | Op::Reshape(a) => {
            if let Some(d) = acc_buf(nodes, grads, *a) {
                d.iter_mut().zip(g).for_each(|(x, &gv)| *x = *x + gv);
            }
        }
        Op::Transpose(a) => {
            let (r, c) = nodes[*a].value.dims2().unwrap();
            if let Some(d) = acc_buf(nodes, grads, *a) {
                for i in 0..r {
                    for j in 0..c {
                        d[i * c + j] = d[i * c + j] + g[j * r + i];
                    }
                }
            }
        }
        Op::Concat { inputs, axis } => {
            let (outer, total, inner) = split_axis(out.shape(), *axis);
            let mut offset = 0;
            for &input in inputs {
                let len = nodes[input].value.shape()[*axis];
                if let Some(d) = acc_buf(nodes, grads, input) {
                    for o in 0..outer {
                        let src = (o * total + offset) * inner;
                        let dst = o * len * inner;
                        for k in 0..len * inner {
                            d[dst + k] = d[dst + k] + g[src + k];
                        }
                    }
                }
                offset += len;
            }
        }
        Op::Slice { input, axis, start } => {
            let (outer, total, inner) = split_axis(nodes[*input].value.shape(), *axis);
            let len = out.shape()[*axis];
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for o in 0..outer {
                    let dst = (o * total + start) * inner;
                    let src = o * len * inner;
                    for k in 0..len * inner {
                        d[dst + k] = d[dst + k] + g[src + k];
                    }
                }
            }
        }
        Op::Sum { input, axis } => {
            let (outer, len, inner) = split_axis(nodes[*input].value.shape(), *axis);
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for o in 0..outer {
                    for r in 0..len {
                        for c in 0..inner {
                            let i = (o * len + r) * inner + c;
                            d[i] = d[i] + g[o * inner + c];
                        }
                    }
                }
            }
        }
        Op::SumAll(a) => {
            if let Some(d) = acc_buf(nodes, grads, *a) {
                d.iter_mut().for_each(|x| *x = *x + g[0]);
            }
        }
        Op::Softmax { input, axis } => {
            let (outer, len, inner) = split_axis(out.shape(), *axis);
            let y = out.data();
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for o in 0..outer {
                    for c in 0..inner {
                        let at = |r: usize| (o * len + r) * inner + c;
                        let dot: T = (0..len).map(|r| g[at(r)] * y[at(r)]).sum();
                        for r in 0..len {
                            d[at(r)] = d[at(r)] + y[at(r)] * (g[at(r)] - dot);
                        }
                    }
                }
            }
        }
        Op::MaskedSoftmax(input) => {
            let len = *out.shape().last().unwrap();
            let y = out.data();
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for row in 0..y.len() / len {
                    let r = row * len..(row + 1) * len;
                    let dot: T = r.clone().map(|i| g[i] * y[i]).sum();
                    for i in r {
                        d[i] = d[i] + y[i] * (g[i] - dot);
                    }
                }
            }
        }
        Op::Relu(a) | Op::LeakyRelu(a, _) | Op::Elu(a, _) => {
            let x = nodes[*a].value.data();
            let y = out.data();
            let op = &nodes[id].op;
            if let Some(d) = acc_buf(nodes, grads, *a) {
                for i in 0..g.len() {
                    let slope = if x[i] > T::zero() {
                        T::one()
                    } else {
                        match op {
                            Op::LeakyRelu(_, alpha) => *alpha,
                            Op::Elu(_, alpha) => y[i] + *alpha,
                            _ => T::zero(),
                        }
                    };
                    d[i] = d[i] + g[i] * slope;
                }
            }
        }
        Op::Exp(a) => {
            if let Some(d) = acc_buf(nodes, grads, *a) {
                for i in 0..g.len() {
                    d[i] = d[i] + g[i] * out.data()[i];
                }
            }
        }
        Op::Log(a) => {
            let x = nodes[*a].value.data();
            if let Some(d) = acc_buf(nodes, grads, *a) {
                for i in 0..g.len() {
                    d[i] = d[i] + g[i] / x[i];
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(d) = acc_buf(nodes, grads, *a) {
                for i in 0..g.len() {
                    let y = out.data()[i];
                    d[i] = d[i] + g[i] * y * (T::one() - y);
                }
            }
        }
        Op::LayerNorm { input, axis, rstd } => {
            let (outer, len, inner) = split_axis(out.shape(), *axis);
            let y = out.data();
            let n = T::of(len as f64);
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for o in 0..outer {
                    for c in 0..inner {
                        let at = |r: usize| (o * len + r) * inner + c;
                        let mean_g: T = (0..len).map(|r| g[at(r)]).sum::<T>() / n;
                        let mean_gy: T = (0..len).map(|r| g[at(r)] * y[at(r)]).sum::<T>() / n;
                        let s = rstd[o * inner + c];
                        for r in 0..len {
                            d[at(r)] = d[at(r)] + s * (g[at(r)] - mean_g - y[at(r)] * mean_gy);
                        }
                    }
                }
            }
        }
        Op::Dropout { input, mask } => {
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for i in 0..g.len() {
                    d[i] = d[i] + g[i] * mask[i];
                }
            }
        }
        Op::MaskedFill { input, mask } => {
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for i in 0..g.len() {
                    if !mask[i] {
                        d[i] = d[i] + g[i];
                    }
                }
            }
        }
        Op::Spmm { weights, x, rows, cols } => {
            let dim = out.shape()[1];
            let xv = nodes[*x].value.data();
            let wv = nodes[*weights].value.data();
            if let Some(dw) = acc_buf(nodes, grads, *weights) {
                for k in 0..rows.len() {
                    let gr = &g[rows[k] * dim..(rows[k] + 1) * dim];
                    let xr = &xv[cols[k] * dim..(cols[k] + 1) * dim];
                    dw[k] = dw[k] + gr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
            if let Some(dx) = acc_buf(nodes, grads, *x) {
                for k in 0..rows.len() {
                    for c in 0..dim {
                        dx[cols[k] * dim + c] = dx[cols[k] * dim + c] + wv[k] * g[rows[k] * dim + c];
                    }
                }
            }
        }
        Op::GatherRows { input, idx } => {
            let dim = out.shape()[1];
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for (r, &src) in idx.iter().enumerate() {
                    for c in 0..dim {
                        d[src * dim + c] = d[src * dim + c] + g[r * dim + c];
                    }
                }
            }
        }
        Op::SegmentSoftmax { input, seg, n_seg } => {
            let y = out.data();
            let mut dots = vec![T::zero(); *n_seg];
            for k in 0..y.len() {
                dots[seg[k]] = dots[seg[k]] + g[k] * y[k];
            }
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for k in 0..y.len() {
                    d[k] = d[k] + y[k] * (g[k] - dots[seg[k]]);
                }
            }
        }
        Op::SegmentMean { input, offsets } => {
            let dim = out.shape()[1];
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for s in 0..offsets.len() - 1 {
                    let n = T::of((offsets[s + 1] - offsets[s]) as f64);
                    for r in offsets[s]..offsets[s + 1] {
                        for c in 0..dim {
                            d[r * dim + c] = d[r * dim + c] + g[s * dim + c] / n;
                        }
                    }
                }
            }
        }
        Op::BceWithLogits { input, targets } => {
            let z = nodes[*input].value.data();
            let n = T::of(z.len() as f64);
            if let Some(d) = acc_buf(nodes, grads, *input) {
                for i in 0..z.len() {
                    let s = T::one() / (T::one() + (-z[i]).exp());
                    d[i] = d[i] + g[0] * (s - targets[i]) / n;
                }
            }
        }
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn value(&self) -> Tensor<T> {
        self.tape.value(*self)
    }

    pub fn grad(&self) -> Option<Tensor<T>> {
        self.tape.grad(*self)
    }

    pub fn backward(&self) -> Result<(), TensorError> {
        self.tape.backward(*self)
    }

    fn unary(&self, op: Op<T>, f: impl Fn(&Tensor<T>) -> Tensor<T>) -> Var<'t, T> {
        let value = f(&self.tape.nodes.borrow()[self.id].value);
        self.tape.push(value, op, self.tape.rg(&[self.id]))
    }

    fn shape_err(&self, op: &'static str, other: &Var<'_, T>) -> TensorError {
        TensorError::Shape { op, lhs: self.shape(), rhs: other.shape() }
    }

    pub fn matmul(&self, rhs: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[rhs.id].value);
            match (a.dims2(), b.dims2()) {
                (Some((m, k)), Some((k2, n))) if k == k2 => {
                    let mut out = vec![T::zero(); m * n];
                    matmul_into(a.data(), b.data(), &mut out, m, k, n);
                    Tensor::new(vec![m, n], out)?
                }
                _ => return Err(self.shape_err("matmul", &rhs)),
            }
        };
        Ok(self.tape.push(value, Op::MatMul(self.id, rhs.id), self.tape.rg(&[self.id, rhs.id])))
    }

    fn broadcast_binary(
        &self,
        rhs: Var<'t, T>,
        name: &'static str,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[rhs.id].value);
            if a.shape() == b.shape() {
                let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
                Tensor::new(a.shape().to_vec(), data)?
            } else {
                let shape = broadcast_shape(a.shape(), b.shape())
                    .ok_or_else(|| self.shape_err(name, &rhs))?;
                let ma = broadcast_map(a.shape(), &shape);
                let mb = broadcast_map(b.shape(), &shape);
                let data = ma
                    .iter()
                    .zip(&mb)
                    .map(|(&i, &j)| f(a.data()[i], b.data()[j]))
                    .collect();
                Tensor::new(shape, data)?
            }
        };
        Ok(self.tape.push(value, op, self.tape.rg(&[self.id, rhs.id])))
    }

    pub fn add(&self, rhs: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.broadcast_binary(rhs, "add", Op::Add(self.id, rhs.id), |a, b| a + b)
    }

    pub fn sub(&self, rhs: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.broadcast_binary(rhs, "sub", Op::Sub(self.id, rhs.id), |a, b| a - b)
    }

    pub fn mul(&self, rhs: Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.broadcast_binary(rhs, "mul", Op::Mul(self.id, rhs.id), |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Var<'t, T> {
        let c = T::of(c);
        self.unary(Op::Scale(self.id, c), |t| t.map(|x| x * c))
    }

    pub fn neg(&self) -> Var<'t, T> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'t, T> {
        let c = T::of(c);
        self.unary(Op::AddScalar(self.id), |t| t.map(|x| x + c))
    }

    pub fn transpose(&self) -> Result<Var<'t, T>, TensorError> {
        let value = self.tape.nodes.borrow()[self.id].value.transpose2()?;
        Ok(self.tape.push(value, Op::Transpose(self.id), self.tape.rg(&[self.id])))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        let value = self.tape.nodes.borrow()[self.id].value.clone().reshape(shape)?;
        Ok(self.tape.push(value, Op::Reshape(self.id), self.tape.rg(&[self.id])))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            if axis >= x.ndim() || start + len > x.shape()[axis] {
                return Err(TensorError::Axis { op: "slice", axis, shape: x.shape().to_vec() });
            }
            let (outer, total, inner) = split_axis(x.shape(), axis);
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let s = (o * total + start) * inner;
                data.extend_from_slice(&x.data()[s..s + len * inner]);
            }
            let mut shape = x.shape().to_vec();
            shape[axis] = len;
            Tensor::new(shape, data)?
        };
        Ok(self.tape.push(value, Op::Slice { input: self.id, axis, start }, self.tape.rg(&[self.id])))
    }

    fn check_axis(&self, op: &'static str, axis: usize) -> Result<(), TensorError> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(TensorError::Axis { op, axis, shape });
        }
        Ok(())
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum(&self, axis: usize) -> Result<Var<'t, T>, TensorError> {
        self.check_axis("sum", axis)?;
        Ok(self.unary(Op::Sum { input: self.id, axis }, |x| {
            let (outer, len, inner) = split_axis(x.shape(), axis);
            let mut data = vec![T::zero(); outer * inner];
            for o in 0..outer {
                for r in 0..len {
                    for c in 0..inner {
                        data[o * inner + c] = data[o * inner + c] + x.data()[(o * len + r) * inner + c];
                    }
                }
            }
            let mut shape = x.shape().to_vec();
            shape[axis] = 1;
            Tensor::new(shape, data).unwrap()
        }))
    }

    pub fn mean(&self, axis: usize) -> Result<Var<'t, T>, TensorError> {
        let total = self.sum(axis)?;
        Ok(total.scale(1.0 / self.shape()[axis] as f64))
    }

    pub fn sum_all(&self) -> Var<'t, T> {
        self.unary(Op::SumAll(self.id), |x| Tensor::scalar(x.data().iter().copied().sum()))
    }

    pub fn mean_all(&self) -> Var<'t, T> {
        let n = self.tape.nodes.borrow()[self.id].value.numel();
        self.sum_all().scale(1.0 / n as f64)
    }

    pub fn softmax(&self, axis: usize) -> Result<Var<'t, T>, TensorError> {
        self.check_axis("softmax", axis)?;
        Ok(self.unary(Op::Softmax { input: self.id, axis }, |x| {
            let (outer, len, inner) = split_axis(x.shape(), axis);
            let mut data = x.data().to_vec();
            for o in 0..outer {
                for c in 0..inner {
                    let at = |r: usize| (o * len + r) * inner + c;
                    let max = (0..len).map(|r| data[at(r)]).fold(T::neg_infinity(), T::max);
                    let mut total = T::zero();
                    for r in 0..len {
                        data[at(r)] = (data[at(r)] - max).exp();
                        total = total + data[at(r)];
                    }
                    for r in 0..len {
                        data[at(r)] = data[at(r)] / total;
                    }
                }
            }
            Tensor::new(x.shape().to_vec(), data).unwrap()
        }))
    }

    /// Softmax over the last axis where `valid[j] == false` removes key `j`
    /// entirely (equivalent to a `-inf` logit). Masked entries are exactly 0.
    pub fn masked_softmax(&self, valid: &[bool]) -> Result<Var<'t, T>, TensorError> {
        let shape = self.shape();
        let len = *shape.last().ok_or(TensorError::Empty("masked_softmax"))?;
        if valid.len() != len {
            return Err(TensorError::Shape { op: "masked_softmax", lhs: shape, rhs: vec![valid.len()] });
        }
        if !valid.iter().any(|&v| v) {
            return Err(TensorError::AllMasked);
        }
        Ok(self.unary(Op::MaskedSoftmax(self.id), |x| {
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(len) {
                let max = row
                    .iter()
                    .zip(valid)
                    .filter(|(_, &ok)| ok)
                    .map(|(&v, _)| v)
                    .fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for (v, &ok) in row.iter_mut().zip(valid) {
                    *v = if ok { (*v - max).exp() } else { T::zero() };
                    total = total + *v;
                }
                row.iter_mut().for_each(|v| *v = *v / total);
            }
            Tensor::new(x.shape().to_vec(), data).unwrap()
        }))
    }

    pub fn relu(&self) -> Var<'t, T> {
        self.unary(Op::Relu(self.id), |x| x.map(|v| v.max(T::zero())))
    }

    pub fn leaky_relu(&self, alpha: f64) -> Var<'t, T> {
        let a = T::of(alpha);
        self.unary(Op::LeakyRelu(self.id, a), |x| x.map(|v| if v > T::zero() { v } else { a * v }))
    }

    pub fn elu(&self, alpha: f64) -> Var<'t, T> {
        let a = T::of(alpha);
        self.unary(Op::Elu(self.id, a), |x| {
            x.map(|v| if v > T::zero() { v } else { a * (v.exp() - T::one()) })
        })
    }

    pub fn exp(&self) -> Var<'t, T> {
        self.unary(Op::Exp(self.id), |x| x.map(T::exp))
    }

    pub fn log(&self) -> Var<'t, T> {
        self.unary(Op::Log(self.id), |x| x.map(T::ln))
    }

    pub fn sigmoid(&self) -> Var<'t, T> {
        self.unary(Op::Sigmoid(self.id), |x| x.map(|v| T::one() / (T::one() + (-v).exp())))
    }

    /// Normalizes to zero mean, unit variance along `axis` (no affine terms).
    pub fn layer_norm(&self, axis: usize, eps: f64) -> Result<Var<'t, T>, TensorError> {
        self.check_axis("layer_norm", axis)?;
        let (value, rstd) = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let (outer, len, inner) = split_axis(x.shape(), axis);
            let n = T::of(len as f64);
            let mut data = x.data().to_vec();
            let mut rstd = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for c in 0..inner {
                    let at = |r: usize| (o * len + r) * inner + c;
                    let mean = (0..len).map(|r| data[at(r)]).sum::<T>() / n;
                    let var = (0..len).map(|r| (data[at(r)] - mean).powi(2)).sum::<T>() / n;
                    let s = T::one() / (var + T::of(eps)).sqrt();
                    for r in 0..len {
                        data[at(r)] = (data[at(r)] - mean) * s;
                    }
                    rstd.push(s);
                }
            }
            (Tensor::new(x.shape().to_vec(), data)?, rstd)
        };
        Ok(self.tape.push(value, Op::LayerNorm { input: self.id, axis, rstd }, self.tape.rg(&[self.id])))
    }

    /// Inverted dropout. Identity when `train` is false or `p == 0`.
    pub fn dropout(&self, p: f64, train: bool, key: DropoutKey) -> Var<'t, T> {
        if !train || p <= 0.0 {
            return *self;
        }
        let n = self.tape.nodes.borrow()[self.id].value.numel();
        let keep = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..n)
            .map(|i| if counter_uniform(key, i as u64) >= p { keep } else { T::zero() })
            .collect();
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
            Tensor::new(x.shape().to_vec(), data).unwrap()
        };
        self.tape.push(value, Op::Dropout { input: self.id, mask }, self.tape.rg(&[self.id]))
    }

    /// Replaces entries where `mask` is true with `value`.
    pub fn masked_fill(&self, mask: &[bool], value: f64) -> Result<Var<'t, T>, TensorError> {
        let shape = self.shape();
        if mask.len() != shape.iter().product::<usize>() {
            return Err(TensorError::Shape { op: "masked_fill", lhs: shape, rhs: vec![mask.len()] });
        }
        let fill = T::of(value);
        let mask: Rc<[bool]> = mask.into();
        let m = mask.clone();
        Ok(self.unary(Op::MaskedFill { input: self.id, mask }, |x| {
            let data = x.data().iter().zip(m.iter()).map(|(&v, &hit)| if hit { fill } else { v }).collect();
            Tensor::new(x.shape().to_vec(), data).unwrap()
        }))
    }

    /// `x W + b`.
    pub fn linear(&self, w: Var<'t, T>, b: Option<Var<'t, T>>) -> Result<Var<'t, T>, TensorError> {
        let y = self.matmul(w)?;
        match b {
            Some(b) => y.add(b),
            None => Ok(y),
        }
    }

    /// Sparse-dense product: `out[rows[k]] += weights[k] * self[cols[k]]`,
    /// with `n_out` output rows.
    pub fn spmm(
        &self,
        weights: Var<'t, T>,
        rows: Rc<[usize]>,
        cols: Rc<[usize]>,
        n_out: usize,
    ) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let w = &nodes[weights.id].value;
            let (n_in, dim) = x.dims2().ok_or_else(|| self.shape_err("spmm", &weights))?;
            if w.numel() != rows.len()
                || rows.len() != cols.len()
                || rows.iter().any(|&r| r >= n_out)
                || cols.iter().any(|&c| c >= n_in)
            {
                return Err(self.shape_err("spmm", &weights));
            }
            let mut out = vec![T::zero(); n_out * dim];
            for k in 0..rows.len() {
                let wk = w.data()[k];
                for c in 0..dim {
                    out[rows[k] * dim + c] = out[rows[k] * dim + c] + wk * x.data()[cols[k] * dim + c];
                }
            }
            Tensor::new(vec![n_out, dim], out)?
        };
        let rg = self.tape.rg(&[self.id, weights.id]);
        Ok(self.tape.push(value, Op::Spmm { weights: weights.id, x: self.id, rows, cols }, rg))
    }

    pub fn gather_rows(&self, idx: Rc<[usize]>) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let (n, dim) = x.dims2().ok_or(TensorError::Empty("gather_rows"))?;
            if idx.iter().any(|&i| i >= n) {
                return Err(TensorError::Axis { op: "gather_rows", axis: 0, shape: x.shape().to_vec() });
            }
            let mut data = Vec::with_capacity(idx.len() * dim);
            for &i in idx.iter() {
                data.extend_from_slice(x.row(i));
            }
            Tensor::new(vec![idx.len(), dim], data)?
        };
        Ok(self.tape.push(value, Op::GatherRows { input: self.id, idx }, self.tape.rg(&[self.id])))
    }

    /// Softmax over groups of a flat vector; entry `k` belongs to group `seg[k]`.
    pub fn segment_softmax(&self, seg: Rc<[usize]>, n_seg: usize) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            if x.numel() != seg.len() || seg.iter().any(|&s| s >= n_seg) {
                return Err(TensorError::Shape { op: "segment_softmax", lhs: x.shape().to_vec(), rhs: vec![seg.len()] });
            }
            let mut max = vec![T::neg_infinity(); n_seg];
            for (k, &v) in x.data().iter().enumerate() {
                max[seg[k]] = max[seg[k]].max(v);
            }
            let mut data: Vec<T> = x.data().iter().enumerate().map(|(k, &v)| (v - max[seg[k]]).exp()).collect();
            let mut total = vec![T::zero(); n_seg];
            for (k, &v) in data.iter().enumerate() {
                total[seg[k]] = total[seg[k]] + v;
            }
            for (k, v) in data.iter_mut().enumerate() {
                *v = *v / total[seg[k]];
            }
            Tensor::new(x.shape().to_vec(), data)?
        };
        Ok(self.tape.push(value, Op::SegmentSoftmax { input: self.id, seg, n_seg }, self.tape.rg(&[self.id])))
    }

    /// Mean of contiguous row ranges `offsets[s]..offsets[s+1]`. Each column is
    /// summed in sorted order so the result does not depend on row order.
    pub fn segment_mean(&self, offsets: Rc<[usize]>) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id].value;
            let (n, dim) = x.dims2().ok_or(TensorError::Empty("segment_mean"))?;
            let valid = offsets.len() >= 2
                && offsets[0] == 0
                && *offsets.last().unwrap() == n
                && offsets.windows(2).all(|w| w[0] < w[1]);
            if !valid {
                return Err(TensorError::Shape { op: "segment_mean", lhs: x.shape().to_vec(), rhs: offsets.to_vec() });
            }
            let n_seg = offsets.len() - 1;
            let mut data = vec![T::zero(); n_seg * dim];
            let mut column = Vec::new();
            for s in 0..n_seg {
                let (lo, hi) = (offsets[s], offsets[s + 1]);
                for c in 0..dim {
                    column.clear();
                    column.extend((lo..hi).map(|r| x.data()[r * dim + c]));
                    column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                    let total = column.iter().fold(T::zero(), |acc, &v| acc + v);
                    data[s * dim + c] = total / T::of((hi - lo) as f64);
                }
            }
            Tensor::new(vec![n_seg, dim], data)?
        };
        Ok(self.tape.push(value, Op::SegmentMean { input: self.id, offsets }, self.tape.rg(&[self.id])))
    }

    /// Mean binary cross-entropy between `sigmoid(self)` and `targets`, computed
    /// from logits.
    pub fn bce_with_logits(&self, targets: &[f64]) -> Result<Var<'t, T>, TensorError> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let z = &nodes[self.id].value;
            if z.numel() != targets.len() || targets.is_empty() {
                return Err(TensorError::Shape { op: "bce_with_logits", lhs: z.shape().to_vec(), rhs: vec![targets.len()] });
            }
            let total: T = z
                .data()
                .iter()
                .zip(targets)
                .map(|(&z, &y)| z.max(T::zero()) - z * T::of(y) + (T::one() + (-z.abs()).exp()).ln())
                .sum();
            Tensor::scalar(total / T::of(targets.len() as f64))
        };
        let targets = targets.iter().map(|&y| T::of(y)).collect();
        Ok(self.tape.push(value, Op::BceWithLogits { input: self.id, targets }, self.tape.rg(&[self.id])))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform in `[0, 1)` derived from the dropout key and an element counter.
pub fn counter_uniform(key: DropoutKey, index: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(splitmix64(key.seed) ^ key.layer) ^ key.step) ^ index);
    (h >> 11) as f64 / (1u64 << 53) as f64
}
