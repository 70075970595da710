use ndarray::{concatenate, s, Array2, Array3, Axis};

use super::layers::check_rate;
use super::{check_same_shape, init, shape_error, view2, view3, Layer, Mode, Param, Rng, Tensor};
use crate::error::{Error, Result};
use rand::Rng as _;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
struct LstmCache {
    /// Input after the dropout mask, `(batch, len, in)`.
    x: Array3<f64>,
    mask: Option<Array2<f64>>,
    /// Activated gates `[i | f | g | o]` per processing step.
    gates: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    hs: Vec<Array2<f64>>,
}

/// One LSTM direction, `(batch, len, in)` to the final hidden state
/// `(batch, hidden)`.
///
/// Gate blocks are ordered input, forget, cell, output along the `4 * hidden`
/// axis. `input_dropout` draws one mask per (example, input channel) and
/// reuses it at every time step.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub reverse: bool,
    pub input_dropout: f64,
    pub w: Param,
    pub u: Param,
    pub b: Param,
    cache: Option<LstmCache>,
}

impl Lstm {
    /// Glorot input weights, orthogonal recurrent weights, zero bias except
    /// 1.0 on the forget gate.
    pub fn new(
        name: &str,
        inputs: usize,
        hidden: usize,
        reverse: bool,
        input_dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_rate(input_dropout)?;
        let w = init::glorot_uniform(inputs, 4 * hidden, inputs, 4 * hidden, rng);
        let u = init::orthogonal(hidden, 4 * hidden, rng);
        let mut b = Array2::zeros((1, 4 * hidden));
        b.slice_mut(s![0, hidden..2 * hidden]).fill(1.0);
        Ok(Lstm {
            reverse,
            input_dropout,
            w: Param::new(format!("{name}.w"), w),
            u: Param::new(format!("{name}.u"), u),
            b: Param::new(format!("{name}.b"), b),
            cache: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.u.value.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.w.value.nrows()
    }

    fn time_order(&self, len: usize) -> Vec<usize> {
        if self.reverse {
            (0..len).rev().collect()
        } else {
            (0..len).collect()
        }
    }
}

impl Layer for Lstm {
    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let d = self.inputs();
        let hdim = self.hidden();
        let x = view3(input, "lstm", &format!("(batch, len, {d})"))?;
        let (bsz, len, dx) = x.dim();
        if dx != d {
            return Err(shape_error("lstm", &format!("(batch, len, {d})"), input.shape()));
        }
        let mask = (mode == Mode::Train && self.input_dropout > 0.0).then(|| {
            let scale = 1.0 / (1.0 - self.input_dropout);
            Array2::from_shape_simple_fn((bsz, d), || {
                if rng.random::<f64>() < self.input_dropout {
                    0.0
                } else {
                    scale
                }
            })
        });
        let x = match &mask {
            Some(m) => &x * &m.view().insert_axis(Axis(1)),
            None => x.to_owned(),
        };
        let xw = x
            .view()
            .into_shape_with_order((bsz * len, d))
            .expect("owned arrays are contiguous")
            .dot(&self.w.value)
            .into_shape_with_order((bsz, len, 4 * hdim))
            .expect("contiguous product");

        let mut h = Array2::zeros((bsz, hdim));
        let mut c = Array2::zeros((bsz, hdim));
        let mut gates = Vec::with_capacity(len);
        let mut cs = Vec::with_capacity(len);
        let mut hs = Vec::with_capacity(len);
        for t in self.time_order(len) {
            let mut z = h.dot(&self.u.value);
            z += &xw.slice(s![.., t, ..]);
            z += &self.b.value.row(0);
            for (k, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
                if (2 * hdim..3 * hdim).contains(&k) {
                    col.mapv_inplace(f64::tanh);
                } else {
                    col.mapv_inplace(sigmoid);
                }
            }
            let i = z.slice(s![.., 0..hdim]);
            let f = z.slice(s![.., hdim..2 * hdim]);
            let g = z.slice(s![.., 2 * hdim..3 * hdim]);
            let o = z.slice(s![.., 3 * hdim..]);
            c = &f * &c + &i * &g;
            h = &o * &c.mapv(f64::tanh);
            gates.push(z);
            cs.push(c.clone());
            hs.push(h.clone());
        }
        self.cache = Some(LstmCache { x, mask, gates, cs, hs });
        Ok(h.into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::NoCachedForward("lstm"))?;
        let (bsz, len, d) = cache.x.dim();
        let hdim = self.hidden();
        check_same_shape("lstm", grad, &[bsz, hdim])?;
        let mut dh = view2(grad, "lstm", "(batch, hidden)")?.to_owned();
        let mut dc = Array2::<f64>::zeros((bsz, hdim));
        let mut dz_all = Array3::<f64>::zeros((bsz, len, 4 * hdim));
        let mut du = Array2::<f64>::zeros(self.u.value.dim());
        let zeros = Array2::<f64>::zeros((bsz, hdim));
        let order = self.time_order(len);
        for step in (0..len).rev() {
            let t = order[step];
            let z = &cache.gates[step];
            let (c_prev, h_prev) = if step == 0 {
                (&zeros, &zeros)
            } else {
                (&cache.cs[step - 1], &cache.hs[step - 1])
            };
            let i = z.slice(s![.., 0..hdim]);
            let f = z.slice(s![.., hdim..2 * hdim]);
            let g = z.slice(s![.., 2 * hdim..3 * hdim]);
            let o = z.slice(s![.., 3 * hdim..]);
            let tanh_c = cache.cs[step].mapv(f64::tanh);

            dc = dc + &dh * &o * &tanh_c.mapv(|v| 1.0 - v * v);
            let d_o = &dh * &tanh_c;
            let di = &dc * &g;
            let dg = &dc * &i;
            let df = &dc * c_prev;

            let mut dz = dz_all.slice_mut(s![.., t, ..]);
            dz.slice_mut(s![.., 0..hdim])
                .assign(&(&di * &i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., hdim..2 * hdim])
                .assign(&(&df * &f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., 2 * hdim..3 * hdim])
                .assign(&(&dg * &g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * hdim..])
                .assign(&(&d_o * &o.mapv(|v| v * (1.0 - v))));

            du += &h_prev.t().dot(&dz);
            dh = dz.dot(&self.u.value.t());
            dc = &dc * &f;
        }
        let dz_flat = dz_all
            .into_shape_with_order((bsz * len, 4 * hdim))
            .expect("owned arrays are contiguous");
        let x_flat = cache
            .x
            .view()
            .into_shape_with_order((bsz * len, d))
            .expect("owned arrays are contiguous");
        let dw = x_flat.t().dot(&dz_flat);
        let db = dz_flat.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dx = dz_flat
            .dot(&self.w.value.t())
            .into_shape_with_order((bsz, len, d))
            .expect("contiguous product");
        if let Some(m) = &cache.mask {
            dx *= &m.view().insert_axis(Axis(1));
        }
        self.w.accumulate(dw);
        self.u.accumulate(du);
        self.b.accumulate(db);
        Ok(dx.into_dyn())
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

/// Forward and backward LSTMs over the same input; the output concatenates
/// their final states into `(batch, 2 * hidden)`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl BiLstm {
    pub fn new(inputs: usize, hidden: usize, input_dropout: f64, rng: &mut Rng) -> Result<Self> {
        Ok(BiLstm {
            fwd: Lstm::new("bilstm.fwd", inputs, hidden, false, input_dropout, rng)?,
            bwd: Lstm::new("bilstm.bwd", inputs, hidden, true, input_dropout, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden() + self.bwd.hidden()
    }
}

impl Layer for BiLstm {
    fn kind(&self) -> &'static str {
        "bilstm"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let hf = self.fwd.forward(input, mode, rng)?;
        let hb = self.bwd.forward(input, mode, rng)?;
        let hf = view2(&hf, "bilstm", "(batch, hidden)")?;
        let hb = view2(&hb, "bilstm", "(batch, hidden)")?;
        Ok(concatenate(Axis(1), &[hf, hb]).expect("equal batch sizes").into_dyn())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let h = self.fwd.hidden();
        let g = view2(grad, "bilstm", &format!("(batch, {})", self.output_dim()))?;
        if g.ncols() != self.output_dim() {
            return Err(shape_error(
                "bilstm",
                &format!("(batch, {})", self.output_dim()),
                grad.shape(),
            ));
        }
        let dx_f = self.fwd.backward(&g.slice(s![.., ..h]).to_owned().into_dyn())?;
        let dx_b = self.bwd.backward(&g.slice(s![.., h..]).to_owned().into_dyn())?;
        Ok(dx_f + dx_b)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.fwd.params();
        p.extend(self.bwd.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fwd.params_mut();
        p.extend(self.bwd.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array3};
    use rand::SeedableRng;

    /// One LSTM cell step from zero state, written out scalar by scalar.
    fn cell_step(x: &[f64], w: &Array2<f64>, b: &Array2<f64>, hidden: usize) -> Vec<f64> {
        (0..hidden)
            .map(|j| {
                let pre = |gate: usize| {
                    let col = gate * hidden + j;
                    b[[0, col]] + x.iter().enumerate().map(|(k, xk)| xk * w[[k, col]]).sum::<f64>()
                };
                let i = sigmoid(pre(0));
                let g = pre(2).tanh();
                let o = sigmoid(pre(3));
                // c_prev = 0, so the forget gate drops out
                let c = i * g;
                o * c.tanh()
            })
            .collect()
    }

    #[test]
    fn one_step_bilstm_is_two_cell_steps() {
        let mut rng = Rng::seed_from_u64(1);
        let mut bi = BiLstm::new(2, 2, 0.0, &mut rng).unwrap();
        bi.fwd.w.value = arr2(&[
            [0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.15, -0.25],
            [0.2, 0.1, -0.3, 0.4, 0.05, -0.15, 0.1, 0.3],
        ]);
        bi.bwd.w.value = bi.fwd.w.value.mapv(|v| -0.5 * v);
        bi.fwd.b.value = arr2(&[[0.0, 0.1, 1.0, 1.0, 0.2, -0.1, 0.0, 0.05]]);
        let x = [0.5, -1.0];
        let input = Array3::from_shape_vec((1, 1, 2), x.to_vec()).unwrap().into_dyn();
        let out = bi.forward(&input, Mode::Eval, &mut rng).unwrap();
        let mut want = cell_step(&x, &bi.fwd.w.value, &bi.fwd.b.value, 2);
        want.extend(cell_step(&x, &bi.bwd.w.value, &bi.bwd.b.value, 2));
        assert_eq!(out.shape(), &[1, 4]);
        for (g, w) in out.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{out:?} vs {want:?}");
        }
    }

    #[test]
    fn output_is_twice_hidden_and_eval_is_deterministic() {
        let mut rng = Rng::seed_from_u64(2);
        let mut bi = BiLstm::new(3, 5, 0.3, &mut rng).unwrap();
        let x = Array3::from_shape_fn((2, 4, 3), |(b, t, c)| (b + t * c) as f64 * 0.1).into_dyn();
        let a = bi.forward(&x, Mode::Eval, &mut rng).unwrap();
        let b = bi.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a.shape(), &[2, 10]);
        assert_eq!(a, b);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = Rng::seed_from_u64(0);
        let l = Lstm::new("l", 2, 3, false, 0.0, &mut rng).unwrap();
        assert_eq!(
            l.b.value.row(0).to_vec(),
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }
}
