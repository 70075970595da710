use autolabel::nn::{
    check_layer, gradient_check, Activation, BiLstm, Conv1D, Dense, Dropout, Embedding, GlobalMaxPool1D, Mode, Node,
    Rng, Sequential, Softmax, SpatialDropout1D, Tensor, DEFAULT_EPS,
};
use ndarray::{Array2, Array3};
use rand::{Rng as _, SeedableRng};

const LAYER_TOL: f64 = 1e-5;

fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn input3(b: usize, l: usize, d: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Array3::from_shape_simple_fn((b, l, d), || r.random_range(-1.0..1.0)).into_dyn()
}

fn input2(b: usize, d: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((b, d), || r.random_range(-1.0..1.0)).into_dyn()
}

fn assert_layer(name: &str, layer: Node, x: Tensor, mode: Mode) {
    let report = check_layer(&layer, &x, mode, DEFAULT_EPS, 11).unwrap();
    println!("{name}: {:.3e} {:?}", report.max_rel_error, report.layers);
    assert!(report.checked() > 0, "{name}: nothing checked");
    assert!(report.max_rel_error < LAYER_TOL, "{name}: {report:?}");
}

#[test]
fn dense_identity() {
    let l = Dense::new(6, 4, Activation::Identity, &mut rng(1));
    assert_layer("dense", Node::Dense(l), input2(4, 6, 2), Mode::Eval);
}

#[test]
fn dense_relu() {
    let l = Dense::new(6, 5, Activation::Relu, &mut rng(1));
    assert_layer("dense_relu", Node::Dense(l), input2(4, 6, 3), Mode::Eval);
}

#[test]
fn conv1d_relu() {
    let l = Conv1D::new(3, 4, 5, Activation::Relu, &mut rng(1));
    assert_layer("conv1d", Node::Conv1D(l), input3(4, 9, 3, 4), Mode::Eval);
}

#[test]
fn global_max_pool() {
    assert_layer(
        "pool",
        Node::GlobalMaxPool1D(GlobalMaxPool1D::new()),
        input3(4, 7, 3, 5),
        Mode::Eval,
    );
}

#[test]
fn bilstm() {
    let l = BiLstm::new(3, 4, 0.0, &mut rng(1)).unwrap();
    assert_layer("bilstm", Node::BiLstm(l), input3(4, 6, 3, 6), Mode::Eval);
}

#[test]
fn bilstm_with_fixed_input_dropout() {
    let l = BiLstm::new(3, 4, 0.3, &mut rng(1)).unwrap();
    assert_layer("bilstm_dropout", Node::BiLstm(l), input3(4, 6, 3, 7), Mode::Train);
}

#[test]
fn spatial_dropout_fixed_mask() {
    let l = SpatialDropout1D::new(0.4).unwrap();
    assert_layer(
        "spatial_dropout",
        Node::SpatialDropout1D(l),
        input3(4, 5, 6, 8),
        Mode::Train,
    );
}

#[test]
fn dropout_fixed_mask() {
    let l = Dropout::new(0.5).unwrap();
    assert_layer("dropout", Node::Dropout(l), input2(4, 8, 9), Mode::Train);
}

#[test]
fn softmax() {
    assert_layer("softmax", Node::Softmax(Softmax::new()), input2(4, 3, 10), Mode::Eval);
}

#[test]
fn trainable_embedding() {
    let mut r = rng(12);
    let w = Array2::from_shape_simple_fn((7, 3), || r.random_range(-1.0..1.0));
    let idx = Array2::from_shape_fn((4, 5), |(b, t)| ((b * 5 + t) % 7) as f64).into_dyn();
    assert_layer("embedding", Node::Embedding(Embedding::new(w, true)), idx, Mode::Eval);
}

#[test]
fn dense_only_network() {
    let mut r = rng(3);
    let mut net = Sequential::new(vec![Node::Dense(Dense::new(5, 3, Activation::Identity, &mut r))]);
    let x = input2(4, 5, 13);
    let t = Array2::from_shape_fn((4, 3), |(b, c)| f64::from(u8::from(b % 3 == c)));
    let report = gradient_check(&mut net, &x, &t, DEFAULT_EPS, 1).unwrap();
    println!("dense-only {:.3e}", report.max_rel_error);
    assert!(report.max_rel_error < 1e-7, "{report:?}");
}
