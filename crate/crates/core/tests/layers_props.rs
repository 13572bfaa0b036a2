mod common;

use common::layers::*;
use fragxsite::autodiff::{ParamStore, Tape, Tensor};
use fragxsite::layers::{
    attention, readout, Bound, DropCtx, Encoder, EncoderStage, GatLayer, GraphBatch, TagcnLayer, TransformerBlock,
};

#[test]
fn tagcn_edgeless_is_sum_of_weights() {
    let mut r = rng(1);
    let mut store = ParamStore::<f64>::new();
    let layer = TagcnLayer::new(&mut store, "t", 3, 2, 2, &mut r).unwrap();
    *store.value_mut(layer.bias) = random_matrix(&mut r, 1, 2);
    let x = random_matrix::<f64>(&mut r, 4, 3);
    let batch = GraphBatch::new(x.clone(), &[(4, &[])]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let got = layer.forward(&p, tape.constant(x.clone()), &batch, tape.constant(batch.prop_weights.clone())).unwrap();
    let mut w = store.value(layer.weights[0]).clone();
    for k in 1..3 {
        for (a, b) in w.data_mut().iter_mut().zip(store.value(layer.weights[k]).data()) {
            *a += b;
        }
    }
    let want = x.matmul(&w).unwrap();
    for i in 0..4 {
        for j in 0..2 {
            let e = want.at2(i, j) + store.value(layer.bias).data()[j];
            assert!((got.value().at2(i, j) - e).abs() < 1e-12);
        }
    }
}

#[test]
fn tagcn_two_node_path_averages() {
    let mut r = rng(2);
    let mut store = ParamStore::<f64>::new();
    let layer = TagcnLayer::new(&mut store, "t", 2, 2, 1, &mut r).unwrap();
    *store.value_mut(layer.weights[0]) = Tensor::zeros(&[2, 2]);
    *store.value_mut(layer.weights[1]) = Tensor::eye(2);
    let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
    let batch = GraphBatch::new(x.clone(), &[(2, &[(0, 1)])]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let out = layer.forward(&p, tape.constant(x), &batch, tape.constant(batch.prop_weights.clone())).unwrap().value();
    assert_eq!(out.data(), &[2.0, 4.0, 2.0, 4.0]);
}

#[test]
fn tagcn_matches_dense_powers() {
    for seed in 0..50 {
        let e = tagcn_oracle_error(seed);
        assert!(e < 1e-5, "seed {seed}: {e}");
    }
}

#[test]
fn gat_isolated_node_and_clique() {
    let mut r = rng(3);
    let mut store = ParamStore::<f64>::new();
    let layer = GatLayer::new(&mut store, "g", 3, 2, 0.2, &mut r).unwrap();
    let x = random_matrix::<f64>(&mut r, 1, 3);
    let batch = GraphBatch::new(x.clone(), &[(1, &[])]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let (out, alpha) = layer.forward(&p, tape.constant(x.clone()), &batch).unwrap();
    assert_eq!(alpha.value().data(), &[1.0]);
    assert_eq!(out.value(), x.matmul(store.value(layer.weight)).unwrap());

    let row = [0.3, -0.7, 1.1];
    let x = Tensor::from_rows(&vec![row.to_vec(); 4]).unwrap();
    let clique = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let batch = GraphBatch::new(x.clone(), &[(4, &clique)]).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let (_, alpha) = layer.forward(&p, tape.constant(x), &batch).unwrap();
    assert!(alpha.value().data().iter().all(|a| (a - 0.25).abs() < 1e-12));
}

#[test]
fn gat_alpha_rows_sum_to_one() {
    for seed in 0..50 {
        assert!(gat_alpha_row_error(seed) < 1e-6);
    }
}

#[test]
fn readout_cases() {
    let tape = Tape::<f64>::new();
    let x = Tensor::from_rows(&[vec![1.5, -2.0]]).unwrap();
    let batch = GraphBatch::new(x.clone(), &[(1, &[])]).unwrap();
    assert_eq!(readout(tape.constant(x.clone()), &batch).unwrap().value(), x);
    let x = Tensor::from_rows(&[vec![1.5, -2.0], vec![-1.5, 2.0]]).unwrap();
    let batch = GraphBatch::new(x.clone(), &[(2, &[])]).unwrap();
    assert_eq!(readout(tape.constant(x), &batch).unwrap().value().data(), &[0.0, 0.0]);
}

#[test]
fn permutation_properties() {
    for seed in 0..30 {
        let (t, g, ro) = permutation_errors(seed);
        assert!(t <= 1e-5 && g <= 1e-5 && ro <= 1e-5, "seed {seed}: {t} {g} {ro}");
        assert!(readout_permutation_exact(seed));
    }
}

#[test]
fn attention_single_key_and_concentration() {
    let tape = Tape::<f64>::new();
    let q = tape.constant(Tensor::from_rows(&[vec![0.4, -1.0]]).unwrap());
    let v = tape.constant(Tensor::from_rows(&[vec![2.0, 3.0, 5.0]]).unwrap());
    let (out, w) = attention(q, q, v, None).unwrap();
    assert_eq!(w.value().data(), &[1.0]);
    assert_eq!(out.value().data(), &[2.0, 3.0, 5.0]);

    let keys = Tensor::<f64>::eye(4);
    let q = Tensor::from_rows(&[vec![0.0, 0.0, 50.0, 0.0]]).unwrap();
    let (_, w) = attention(tape.constant(q), tape.constant(keys.clone()), tape.constant(keys), None).unwrap();
    assert!(w.value().data()[2] > 0.999);
}

#[test]
fn masked_keys_can_be_permuted() {
    let mut r = rng(4);
    let tape = Tape::<f64>::new();
    let q = random_matrix::<f64>(&mut r, 2, 3);
    let k = random_matrix::<f64>(&mut r, 4, 3);
    let v = random_matrix::<f64>(&mut r, 4, 2);
    let valid = [true, false, true, false];
    let (o1, w1) = attention(tape.constant(q.clone()), tape.constant(k.clone()), tape.constant(v.clone()), Some(&valid)).unwrap();
    // swap the two masked keys
    let swap = |t: &Tensor<f64>| {
        let rows: Vec<Vec<f64>> = [0, 3, 2, 1].iter().map(|&i| t.row(i).to_vec()).collect();
        Tensor::from_rows(&rows).unwrap()
    };
    let (o2, _) = attention(tape.constant(q), tape.constant(swap(&k)), tape.constant(swap(&v)), Some(&valid)).unwrap();
    assert_eq!(o1.value(), o2.value());
    for i in 0..2 {
        assert_eq!(w1.value().at2(i, 1), 0.0);
        assert_eq!(w1.value().at2(i, 3), 0.0);
    }
    assert!(attention(tape.constant(Tensor::zeros(&[1, 3])), tape.constant(Tensor::zeros(&[2, 3])), tape.constant(Tensor::zeros(&[2, 3])), Some(&[false, false])).is_err());
}

#[test]
fn block_with_zero_output_projections_is_identity() {
    let mut r = rng(5);
    let mut store = ParamStore::<f64>::new();
    let block = TransformerBlock::new(&mut store, "b", 8, 4, 4, 0, &mut r).unwrap();
    *store.value_mut(block.mha.o.w) = Tensor::zeros(&[8, 8]);
    *store.value_mut(block.ff2.w) = Tensor::zeros(&[32, 8]);
    let x = random_matrix::<f64>(&mut r, 3, 8);
    let kv = random_matrix::<f64>(&mut r, 5, 8);
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let out = block.forward(&p, tape.constant(x.clone()), Some((tape.constant(kv), None)), &DropCtx::eval()).unwrap();
    assert_eq!(out.out.value(), x);
    assert_eq!(out.head_weights.len(), 4);
}

#[test]
fn self_attention_single_token() {
    let mut r = rng(6);
    let mut store = ParamStore::<f64>::new();
    let block = TransformerBlock::new(&mut store, "b", 8, 2, 4, 0, &mut r).unwrap();
    let tape = Tape::new();
    let p = Bound::new(&tape, &store);
    let out = block.forward(&p, tape.constant(random_matrix(&mut r, 1, 8)), None, &DropCtx::eval()).unwrap();
    for w in out.head_weights {
        assert_eq!(w.value().data(), &[1.0]);
    }
}

#[test]
fn layer_gradients_match_finite_differences() {
    for seed in 0..3 {
        for (name, e) in [
            ("tagcn", gradcheck_tagcn(seed)),
            ("gat", gradcheck_gat(seed)),
            ("attention", gradcheck_attention(seed)),
            ("cross block", gradcheck_block(seed, true)),
            ("self block", gradcheck_block(seed, false)),
        ] {
            assert!(e < 1e-4, "{name} seed {seed}: {e}");
        }
    }
}

#[test]
fn encoder_wiring() {
    let mut store = ParamStore::<f32>::new();
    let enc = Encoder::new(&mut store, "enc", 74, 16, 8, 2, 0.2, &mut rng(0)).unwrap();
    use EncoderStage::*;
    assert_eq!(enc.stages(), [Tagcn, Relu, Tagcn, Relu, Gat, Elu, Readout]);
    assert_eq!(enc.tagcn.iter().map(|t| (t.in_dim, t.out_dim, t.hops)).collect::<Vec<_>>(), vec![(74, 16, 2), (16, 16, 2)]);
    assert_eq!((enc.gat.in_dim, enc.gat.out_dim), (16, 8));
}
