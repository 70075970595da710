use ndarray::{s, Array2, Array3, ArrayD, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_same_shape, init, loss, shape_error, view2, view3, Layer, Mode, Param, Rng, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|v| v.max(0.0)),
        }
    }

    /// Multiplies `g` by the derivative at `z`; zero at and below the kink.
    fn backprop(self, z: &Array2<f64>, mut g: Array2<f64>) -> Array2<f64> {
        if self == Activation::Relu {
            Zip::from(&mut g).and(z).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        g
    }

    fn kink_pattern(self, z: &Array2<f64>, out: &mut Vec<u32>) {
        if self == Activation::Relu {
            out.extend(z.iter().map(|&v| u32::from(v > 0.0)));
        }
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Array2<f64> {
    let scale = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < rate { 0.0 } else { scale })
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Frozen (or optionally trainable) lookup table: `(batch, len)` indices
/// stored as floats to `(batch, len, dim)`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub weight: Param,
    pub trainable: bool,
    cache: Option<Array2<usize>>,
}

impl Embedding {
    pub fn new(weights: Array2<f64>, trainable: bool) -> Self {
        Embedding {
            weight: Param::new("embedding.weight", weights),
            trainable,
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.weight.value.nrows()
    }
}

impl Layer for Embedding {
    fn kind(&self) -> &'static str {
        "embedding"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let x = view2(input, "embedding", "(batch, len) indices")?;
        let rows = self.vocab_size();
        let mut idx = Array2::zeros(x.dim());
        for (slot, &v) in idx.iter_mut().zip(x.iter()) {
            if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < rows) {
                return Err(Error::ShapeMismatch(format!(
                    "embedding: index {v} outside vocabulary of {rows}"
                )));
            }
            *slot = v as usize;
        }
        let (b, l) = x.dim();
        let mut out = Array3::zeros((b, l, self.dim()));
        for ((i, t), &k) in idx.indexed_iter() {
            out.slice_mut(s![i, t, ..]).assign(&self.weight.value.row(k));
        }
        self.cache = Some(idx);
        Ok(out.into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let idx = self.cache.as_ref().ok_or(Error::NoCachedForward("embedding"))?;
        let (b, l) = idx.dim();
        check_same_shape("embedding", grad, &[b, l, self.dim()])?;
        if self.trainable {
            let g = view3(grad, "embedding", "(batch, len, dim)")?;
            let mut dw = Array2::zeros(self.weight.value.dim());
            for ((i, t), &k) in idx.indexed_iter() {
                let mut row = dw.row_mut(k);
                row += &g.slice(s![i, t, ..]);
            }
            self.weight.accumulate(dw);
        }
        Ok(ArrayD::zeros(vec![b, l]))
    }

    fn params(&self) -> Vec<&Param> {
        if self.trainable {
            vec![&self.weight]
        } else {
            Vec::new()
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        if self.trainable {
            vec![&mut self.weight]
        } else {
            Vec::new()
        }
    }

    fn input_is_differentiable(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
struct DropoutCache {
    shape: Vec<usize>,
    mask: Option<ArrayD<f64>>,
}

/// Zeroes whole channels of a `(batch, len, dim)` tensor: one keep/drop draw
/// per (example, channel), shared by every time step.
#[derive(Debug, Clone)]
pub struct SpatialDropout1D {
    pub rate: f64,
    cache: Option<DropoutCache>,
}

impl SpatialDropout1D {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(SpatialDropout1D { rate, cache: None })
    }
}

impl Layer for SpatialDropout1D {
    fn kind(&self) -> &'static str {
        "spatial_dropout"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let x = view3(input, "spatial_dropout", "(batch, len, dim)")?;
        let (b, l, d) = x.dim();
        let mask = (mode == Mode::Train && self.rate > 0.0).then(|| {
            let m = dropout_mask(b, d, self.rate, rng);
            m.insert_axis(Axis(1))
                .broadcast((b, l, d))
                .expect("mask broadcasts over time")
                .to_owned()
                .into_dyn()
        });
        let out = match &mask {
            Some(m) => input * m,
            None => input.clone(),
        };
        self.cache = Some(DropoutCache {
            shape: input.shape().to_vec(),
            mask,
        });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let c = self.cache.as_ref().ok_or(Error::NoCachedForward("spatial_dropout"))?;
        check_same_shape("spatial_dropout", grad, &c.shape)?;
        Ok(match &c.mask {
            Some(m) => grad * m,
            None => grad.clone(),
        })
    }
}

/// Inverted element-wise dropout on any shape.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    cache: Option<DropoutCache>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Dropout { rate, cache: None })
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let mask = (mode == Mode::Train && self.rate > 0.0).then(|| {
            let scale = 1.0 / (1.0 - self.rate);
            input.mapv(|_| if rng.random::<f64>() < self.rate { 0.0 } else { scale })
        });
        let out = match &mask {
            Some(m) => input * m,
            None => input.clone(),
        };
        self.cache = Some(DropoutCache {
            shape: input.shape().to_vec(),
            mask,
        });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let c = self.cache.as_ref().ok_or(Error::NoCachedForward("dropout"))?;
        check_same_shape("dropout", grad, &c.shape)?;
        Ok(match &c.mask {
            Some(m) => grad * m,
            None => grad.clone(),
        })
    }
}

#[derive(Debug, Clone)]
struct ConvCache {
    batch: usize,
    len: usize,
    cols: Array2<f64>,
    z: Array2<f64>,
}

/// Valid 1-D convolution: `(batch, len, in)` to `(batch, len - k + 1, filters)`.
///
/// The kernel is stored unrolled as a `(k * in, filters)` matrix whose row
/// `j * in + c` weights channel `c` at offset `j`.
#[derive(Debug, Clone)]
pub struct Conv1D {
    pub kernel: usize,
    pub activation: Activation,
    pub w: Param,
    pub b: Param,
    cache: Option<ConvCache>,
}

impl Conv1D {
    pub fn new(in_channels: usize, filters: usize, kernel: usize, activation: Activation, rng: &mut Rng) -> Self {
        let w = init::glorot_uniform(
            kernel * in_channels,
            filters,
            kernel * in_channels,
            kernel * filters,
            rng,
        );
        Conv1D {
            kernel,
            activation,
            w: Param::new("conv.w", w),
            b: Param::new("conv.b", Array2::zeros((1, filters))),
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.w.value.nrows() / self.kernel
    }

    pub fn filters(&self) -> usize {
        self.w.value.ncols()
    }
}

impl Layer for Conv1D {
    fn kind(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let d = self.in_channels();
        let k = self.kernel;
        let x = view3(input, "conv1d", &format!("(batch, len >= {k}, {d})"))?;
        let (b, l, dx) = x.dim();
        if dx != d || l < k {
            return Err(shape_error(
                "conv1d",
                &format!("(batch, len >= {k}, {d})"),
                input.shape(),
            ));
        }
        let t_out = l - k + 1;
        let mut cols = Array2::zeros((b * t_out, k * d));
        for i in 0..b {
            for t in 0..t_out {
                let window = x.slice(s![i, t..t + k, ..]);
                let mut row = cols.row_mut(i * t_out + t);
                for (j, step) in window.outer_iter().enumerate() {
                    row.slice_mut(s![j * d..(j + 1) * d]).assign(&step);
                }
            }
        }
        let mut z = cols.dot(&self.w.value);
        z += &self.b.value.row(0);
        let a = self.activation.apply(&z);
        let out = a
            .into_shape_with_order((b, t_out, self.filters()))
            .expect("contiguous product")
            .into_dyn();
        self.cache = Some(ConvCache {
            batch: b,
            len: l,
            cols,
            z,
        });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let c = self.cache.as_ref().ok_or(Error::NoCachedForward("conv1d"))?;
        let (d, k, f) = (self.in_channels(), self.kernel, self.filters());
        let t_out = c.len - k + 1;
        check_same_shape("conv1d", grad, &[c.batch, t_out, f])?;
        let g = grad
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((c.batch * t_out, f))
            .expect("contiguous gradient");
        let dz = self.activation.backprop(&c.z, g);
        let dw = c.cols.t().dot(&dz);
        let db = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dcols = dz.dot(&self.w.value.t());
        let mut dx = Array3::<f64>::zeros((c.batch, c.len, d));
        for i in 0..c.batch {
            for t in 0..t_out {
                let row = dcols.row(i * t_out + t);
                for j in 0..k {
                    let mut dst = dx.slice_mut(s![i, t + j, ..]);
                    dst += &row.slice(s![j * d..(j + 1) * d]);
                }
            }
        }
        self.w.accumulate(dw);
        self.b.accumulate(db);
        Ok(dx.into_dyn())
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    fn kink_pattern(&self, out: &mut Vec<u32>) {
        if let Some(c) = &self.cache {
            self.activation.kink_pattern(&c.z, out);
        }
    }
}

/// Maximum over the time axis: `(batch, len, ch)` to `(batch, ch)`. Ties
/// route the gradient to the earliest time step.
#[derive(Debug, Clone, Default)]
pub struct GlobalMaxPool1D {
    cache: Option<(usize, Array2<usize>)>,
}

impl GlobalMaxPool1D {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for GlobalMaxPool1D {
    fn kind(&self) -> &'static str {
        "global_max_pool"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let x = view3(input, "global_max_pool", "(batch, len >= 1, channels)")?;
        let (b, l, ch) = x.dim();
        if l == 0 {
            return Err(shape_error(
                "global_max_pool",
                "(batch, len >= 1, channels)",
                input.shape(),
            ));
        }
        let mut arg = Array2::zeros((b, ch));
        let mut out = Array2::zeros((b, ch));
        for i in 0..b {
            for c in 0..ch {
                let mut best = 0;
                for t in 1..l {
                    if x[[i, t, c]] > x[[i, best, c]] {
                        best = t;
                    }
                }
                arg[[i, c]] = best;
                out[[i, c]] = x[[i, best, c]];
            }
        }
        self.cache = Some((l, arg));
        Ok(out.into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (l, arg) = self.cache.as_ref().ok_or(Error::NoCachedForward("global_max_pool"))?;
        let (b, ch) = arg.dim();
        check_same_shape("global_max_pool", grad, &[b, ch])?;
        let mut dx = Array3::zeros((b, *l, ch));
        for ((i, c), &t) in arg.indexed_iter() {
            dx[[i, t, c]] = grad[[i, c]];
        }
        Ok(dx.into_dyn())
    }

    fn kink_pattern(&self, out: &mut Vec<u32>) {
        if let Some((_, arg)) = &self.cache {
            out.extend(arg.iter().map(|&t| t as u32));
        }
    }
}

/// Affine map `(batch, in)` to `(batch, out)` followed by an activation.
#[derive(Debug, Clone)]
pub struct Dense {
    pub activation: Activation,
    pub w: Param,
    pub b: Param,
    cache: Option<(Array2<f64>, Array2<f64>)>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        Dense {
            activation,
            w: Param::new("dense.w", init::glorot_uniform(inputs, outputs, inputs, outputs, rng)),
            b: Param::new("dense.b", Array2::zeros((1, outputs))),
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.value.ncols()
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let n = self.inputs();
        let x = view2(input, "dense", &format!("(batch, {n})"))?;
        if x.ncols() != n {
            return Err(shape_error("dense", &format!("(batch, {n})"), input.shape()));
        }
        let mut z = x.dot(&self.w.value);
        z += &self.b.value.row(0);
        let a = self.activation.apply(&z);
        self.cache = Some((x.to_owned(), z));
        Ok(a.into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (x, z) = self.cache.as_ref().ok_or(Error::NoCachedForward("dense"))?;
        check_same_shape("dense", grad, &[x.nrows(), self.outputs()])?;
        let g = view2(grad, "dense", "(batch, out)")?.to_owned();
        let dz = self.activation.backprop(z, g);
        let dx = dz.dot(&self.w.value.t());
        self.w.accumulate(x.t().dot(&dz));
        self.b.accumulate(dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
        Ok(dx.into_dyn())
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    fn kink_pattern(&self, out: &mut Vec<u32>) {
        if let Some((_, z)) = &self.cache {
            self.activation.kink_pattern(z, out);
        }
    }
}

/// Row-wise softmax. Training fuses it into the loss instead; this layer is
/// for inference and for checking the Jacobian.
#[derive(Debug, Clone, Default)]
pub struct Softmax {
    cache: Option<Array2<f64>>,
}

impl Softmax {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Softmax {
    fn kind(&self) -> &'static str {
        "softmax"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode, _rng: &mut Rng) -> Result<Tensor> {
        let p = loss::softmax_rows(&view2(input, "softmax", "(batch, classes)")?);
        self.cache = Some(p.clone());
        Ok(p.into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let p = self.cache.as_ref().ok_or(Error::NoCachedForward("softmax"))?;
        check_same_shape("softmax", grad, p.shape())?;
        let g = view2(grad, "softmax", "(batch, classes)")?;
        let dot = (&g * p).sum_axis(Axis(1)).insert_axis(Axis(1));
        Ok((p * &(&g - &dot)).into_dyn())
    }
}
