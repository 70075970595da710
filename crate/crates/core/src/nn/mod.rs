//! Dense double-precision layers with hand-written backward passes.
//!
//! Every layer maps a [`Tensor`] to a [`Tensor`] and caches what its backward
//! pass needs. Parameters live in [`Param`]s whose gradients accumulate until
//! [`Sequential::zero_grad`] clears them.

mod gradcheck;
pub mod init;
mod layers;
mod loss;
mod lstm;
mod optim;

use ndarray::{Array2, ArrayD, ArrayView2, ArrayView3, Ix2, Ix3};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::{check_layer, gradient_check, GradCheckReport, DEFAULT_EPS, MAX_SAMPLES_PER_LAYER, REL_ERR_FLOOR};
pub use layers::{Activation, Conv1D, Dense, Dropout, Embedding, GlobalMaxPool1D, Softmax, SpatialDropout1D};
pub use loss::{accuracy, cross_entropy, loss_and_grad, softmax_rows, LOSS_EPS};
pub use lstm::{BiLstm, Lstm};
pub use optim::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

/// Dense n-dimensional array; shapes are documented per layer.
pub type Tensor = ArrayD<f64>;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Dropout is the identity; repeated calls give identical outputs.
    Eval,
}

/// A trainable matrix (biases are `1 x n`) and its accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    #[serde(skip)]
    pub grad: Option<Array2<f64>>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array2<f64>) -> Self {
        Param {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn accumulate(&mut self, g: Array2<f64>) {
        debug_assert_eq!(g.dim(), self.value.dim());
        match &mut self.grad {
            Some(acc) => *acc += &g,
            None => self.grad = Some(g),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

pub trait Layer {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor>;

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the last forward input.
    fn backward(&mut self, grad: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Which side of each ReLU/max kink the last forward landed on; a
    /// finite-difference probe is only valid if this does not change.
    fn kink_pattern(&self, _out: &mut Vec<u32>) {}

    /// False for layers whose input is a set of indices.
    fn input_is_differentiable(&self) -> bool {
        true
    }
}

pub(crate) fn shape_error(layer: &str, expected: &str, got: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{layer}: expected {expected}, got {got:?}"))
}

pub(crate) fn view2<'a>(t: &'a Tensor, layer: &str, expected: &str) -> Result<ArrayView2<'a, f64>> {
    t.view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| shape_error(layer, expected, t.shape()))
}

pub(crate) fn view3<'a>(t: &'a Tensor, layer: &str, expected: &str) -> Result<ArrayView3<'a, f64>> {
    t.view()
        .into_dimensionality::<Ix3>()
        .map_err(|_| shape_error(layer, expected, t.shape()))
}

pub(crate) fn check_same_shape(layer: &str, grad: &Tensor, shape: &[usize]) -> Result<()> {
    if grad.shape() == shape {
        Ok(())
    } else {
        Err(shape_error(
            layer,
            &format!("gradient of shape {shape:?}"),
            grad.shape(),
        ))
    }
}

/// Closed set of layers so models can be cloned and inspected.
// A model holds a handful of nodes, so boxing the large variants buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Node {
    Embedding(Embedding),
    SpatialDropout1D(SpatialDropout1D),
    Dropout(Dropout),
    Conv1D(Conv1D),
    GlobalMaxPool1D(GlobalMaxPool1D),
    BiLstm(BiLstm),
    Dense(Dense),
    Softmax(Softmax),
}

macro_rules! dispatch {
    ($self:ident, $l:ident => $e:expr) => {
        match $self {
            Node::Embedding($l) => $e,
            Node::SpatialDropout1D($l) => $e,
            Node::Dropout($l) => $e,
            Node::Conv1D($l) => $e,
            Node::GlobalMaxPool1D($l) => $e,
            Node::BiLstm($l) => $e,
            Node::Dense($l) => $e,
            Node::Softmax($l) => $e,
        }
    };
}

impl Layer for Node {
    fn kind(&self) -> &'static str {
        dispatch!(self, l => l.kind())
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        dispatch!(self, l => l.forward(input, mode, rng))
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        dispatch!(self, l => l.backward(grad))
    }

    fn params(&self) -> Vec<&Param> {
        dispatch!(self, l => l.params())
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        dispatch!(self, l => l.params_mut())
    }

    fn kink_pattern(&self, out: &mut Vec<u32>) {
        dispatch!(self, l => l.kink_pattern(out))
    }

    fn input_is_differentiable(&self) -> bool {
        dispatch!(self, l => l.input_is_differentiable())
    }
}

/// Layers applied in order.
#[derive(Debug, Clone, Default)]
pub struct Sequential {
    pub layers: Vec<Node>,
}

impl Sequential {
    pub fn new(layers: Vec<Node>) -> Self {
        Sequential { layers }
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("{} output", layer.kind())));
            }
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn kink_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for l in &self.layers {
            l.kink_pattern(&mut out);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
