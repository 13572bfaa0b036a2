#![allow(dead_code)]

use fragxsite::autodiff::gradcheck::check_params;
use fragxsite::autodiff::{ParamStore, Real, Tape, Tensor, TensorError, Var};
use fragxsite::layers::{attention, Bound, DropCtx, GatLayer, GraphBatch, TagcnLayer, TransformerBlock};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<T> {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    Tensor::from_f64(&[rows, cols], &data).unwrap()
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    edges
}

/// Dense `Σ Â^k X W_k + b` in f64.
pub fn dense_tagcn(n: usize, edges: &[(u32, u32)], x: &Tensor<f64>, ws: &[Tensor<f64>], b: &Tensor<f64>) -> Vec<f64> {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for &(u, v) in edges {
        a[u as usize][v as usize] = 1.0;
        a[v as usize][u as usize] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let norm: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect()).collect();
    let out_dim = b.numel();
    let mut out = vec![0.0; n * out_dim];
    let mut h = x.clone();
    for (k, w) in ws.iter().enumerate() {
        if k > 0 {
            let (_, d) = h.dims2().unwrap();
            let mut next = vec![0.0; n * d];
            for i in 0..n {
                for j in 0..n {
                    for c in 0..d {
                        next[i * d + c] += norm[i][j] * h.at2(j, c);
                    }
                }
            }
            h = Tensor::new(vec![n, d], next).unwrap();
        }
        let hw = h.matmul(w).unwrap();
        for (o, v) in out.iter_mut().zip(hw.data()) {
            *o += v;
        }
    }
    for i in 0..n {
        for c in 0..out_dim {
            out[i * out_dim + c] += b.data()[c];
        }
    }
    out
}

/// Max relative error between the tape TAGCN and the dense formula on one random graph.
pub fn tagcn_oracle_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.gen_range(1..=20);
    let (din, dout, hops) = (r.gen_range(1..6), r.gen_range(1..6), r.gen_range(1..4));
    let edges = random_graph(&mut r, n, 0.25);
    let mut store = ParamStore::<f64>::new();
    let layer = TagcnLayer::new(&mut store, "t", din, dout, hops, &mut r).unwrap();
    *store.value_mut(layer.bias) = random_matrix(&mut r, 1, dout);
    let x = random_matrix::<f64>(&mut r, n, din);
    let batch = GraphBatch::new(x.clone(), &[(n, &edges)]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let prop = tape.constant(batch.prop_weights.clone());
    let got = layer.forward(&p, tape.constant(x.clone()), &batch, prop).unwrap().value();
    let ws: Vec<_> = layer.weights.iter().map(|&id| store.value(id).clone()).collect();
    let want = dense_tagcn(n, &edges, &x, &ws, store.value(layer.bias));
    got.data()
        .iter()
        .zip(&want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1e-12))
        .fold(0.0, f64::max)
}

/// Largest deviation of a GAT neighborhood's coefficients from summing to 1.
pub fn gat_alpha_row_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.gen_range(1..=20);
    let edges = random_graph(&mut r, n, 0.3);
    let mut store = ParamStore::<f64>::new();
    let layer = GatLayer::new(&mut store, "g", 4, 3, 0.2, &mut r).unwrap();
    let x = random_matrix::<f64>(&mut r, n, 4);
    let batch = GraphBatch::new(x.clone(), &[(n, &edges)]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let (_, alpha) = layer.forward(&p, tape.constant(x), &batch).unwrap();
    let mut sums = vec![0.0; n];
    for (k, &c) in batch.att_center.iter().enumerate() {
        sums[c] += alpha.value().data()[k];
    }
    sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// Loss `Σ out ⊙ R` for a fixed random `R`, so every output entry matters.
fn weighted_sum<'t>(out: Var<'t, f64>, seed: u64) -> Result<Var<'t, f64>, TensorError> {
    let shape = out.shape();
    let r = random_matrix::<f64>(&mut rng(seed), shape[0], shape[1]);
    Ok(out.mul(out.tape().constant(r))?.sum_all())
}

pub fn gradcheck_tagcn(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 6;
    let edges = random_graph(&mut r, n, 0.4);
    let mut store = ParamStore::<f64>::new();
    let layer = TagcnLayer::new(&mut store, "t", 3, 4, 2, &mut r).unwrap();
    let x_id = store.add("x", random_matrix(&mut r, n, 3)).unwrap();
    let batch = GraphBatch::new(random_matrix::<f64>(&mut r, n, 3), &[(n, &edges)]).unwrap();
    check_params(&mut store, 1e-6, None, |tape, s| {
        let p = Bound::new(tape, s);
        let prop = tape.constant(batch.prop_weights.clone());
        weighted_sum(layer.forward(&p, p.get(x_id), &batch, prop)?, seed)
    })
    .unwrap()
    .max_rel_error
}

pub fn gradcheck_gat(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 6;
    let edges = random_graph(&mut r, n, 0.4);
    let mut store = ParamStore::<f64>::new();
    let layer = GatLayer::new(&mut store, "g", 3, 4, 0.2, &mut r).unwrap();
    let x_id = store.add("x", random_matrix(&mut r, n, 3)).unwrap();
    let batch = GraphBatch::new(random_matrix::<f64>(&mut r, n, 3), &[(n, &edges)]).unwrap();
    check_params(&mut store, 1e-6, None, |tape, s| {
        let p = Bound::new(tape, s);
        weighted_sum(layer.forward(&p, p.get(x_id), &batch)?.0.elu(1.0), seed)
    })
    .unwrap()
    .max_rel_error
}

pub fn gradcheck_attention(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut store = ParamStore::<f64>::new();
    let q = store.add("q", random_matrix(&mut r, 3, 4)).unwrap();
    let k = store.add("k", random_matrix(&mut r, 5, 4)).unwrap();
    let v = store.add("v", random_matrix(&mut r, 5, 2)).unwrap();
    let valid = [true, false, true, true, false];
    check_params(&mut store, 1e-6, None, |tape, s| {
        let p = Bound::new(tape, s);
        weighted_sum(attention(p.get(q), p.get(k), p.get(v), Some(&valid))?.0, seed)
    })
    .unwrap()
    .max_rel_error
}

pub fn gradcheck_block(seed: u64, cross: bool) -> f64 {
    let mut r = rng(seed);
    let mut store = ParamStore::<f64>::new();
    let block = TransformerBlock::new(&mut store, "blk", 8, 2, 2, 0, &mut r).unwrap();
    let x = store.add("x", random_matrix(&mut r, 3, 8)).unwrap();
    let kv = store.add("kv", random_matrix(&mut r, 4, 8)).unwrap();
    let valid = [true, true, false, true];
    check_params(&mut store, 1e-6, None, |tape, s| {
        let p = Bound::new(tape, s);
        let kv = if cross { Some((p.get(kv), Some(&valid[..]))) } else { None };
        weighted_sum(block.forward(&p, p.get(x), kv, &DropCtx::eval())?.out, seed)
    })
    .unwrap()
    .max_rel_error
}

/// Errors after relabeling nodes: `(tagcn, gat, readout of the GAT output)`.
pub fn permutation_errors(seed: u64) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=20);
    let edges = random_graph(&mut r, n, 0.3);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    // node i of the original becomes node perm[i]
    let x = random_matrix::<f32>(&mut r, n, 5);
    let mut px = vec![0.0f32; n * 5];
    for i in 0..n {
        px[perm[i] * 5..perm[i] * 5 + 5].copy_from_slice(x.row(i));
    }
    let px = Tensor::new(vec![n, 5], px).unwrap();
    let pedges: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (perm[a as usize] as u32, perm[b as usize] as u32)).collect();

    let mut store = ParamStore::<f32>::new();
    let tagcn = TagcnLayer::new(&mut store, "t", 5, 4, 2, &mut r).unwrap();
    let gat = GatLayer::new(&mut store, "g", 5, 4, 0.2, &mut r).unwrap();
    let run = |x: &Tensor<f32>, edges: &[(u32, u32)]| {
        let batch = GraphBatch::new(x.clone(), &[(n, edges)]).unwrap();
        let tape = Tape::new();
        let p = Bound::new(&tape, &store);
        let prop = tape.constant(batch.prop_weights.clone());
        let xv = tape.constant(x.clone());
        let t = tagcn.forward(&p, xv, &batch, prop).unwrap();
        let g = gat.forward(&p, xv, &batch).unwrap().0;
        let ro = fragxsite::layers::readout(g, &batch).unwrap();
        (t.value(), g.value(), ro.value())
    };
    let (t0, g0, r0) = run(&x, &edges);
    let (t1, g1, r1) = run(&px, &pedges);
    let row_err = |a: &Tensor<f32>, b: &Tensor<f32>| {
        let mut worst = 0.0f64;
        for i in 0..n {
            for (u, v) in a.row(i).iter().zip(b.row(perm[i])) {
                worst = worst.max(((u - v).abs() / u.abs().max(1.0)) as f64);
            }
        }
        worst
    };
    let ro_err = r0.data().iter().zip(r1.data()).map(|(a, b)| ((a - b).abs() / a.abs().max(1.0)) as f64).fold(0.0, f64::max);
    (row_err(&t0, &t1), row_err(&g0, &g1), ro_err)
}

/// Readout of a matrix and of a row permutation of it, compared bit-for-bit.
pub fn readout_permutation_exact(seed: u64) -> bool {
    let mut r = rng(seed);
    let n = r.gen_range(1..=40);
    let x = random_matrix::<f32>(&mut r, n, 6);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let rows: Vec<Vec<f32>> = order.iter().map(|&i| x.row(i).to_vec()).collect();
    let px = Tensor::from_rows(&rows).unwrap();
    let tape = Tape::new();
    let run = |t: &Tensor<f32>| {
        let batch = GraphBatch::new(t.clone(), &[(n, &[])]).unwrap();
        fragxsite::layers::readout(tape.constant(t.clone()), &batch).unwrap().value()
    };
    run(&x) == run(&px)
}
