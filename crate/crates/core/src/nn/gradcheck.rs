//! Central finite differences against the analytic backward pass.

use ndarray::{Array2, ArrayD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{loss, view2, Layer, Mode, Node, Rng, Sequential, Tensor};
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const MAX_SAMPLES_PER_LAYER: usize = 200;
/// Denominator floor for the relative error. A loss near 1 carries about
/// 1e-16 of rounding, so a central difference at `eps = 1e-5` is only good to
/// about 1e-11 absolute; below this floor the error is measured against the
/// floor instead, which still flags any absolute discrepancy above
/// `tolerance * 1e-3`.
pub const REL_ERR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCheck {
    pub layer: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub kinks_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub layers: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

enum Objective {
    /// Softmax cross-entropy of the network output against one-hot rows.
    CrossEntropy(Array2<f64>),
    /// `Σ r ⊙ output` for a fixed random `r`.
    Projection(Tensor),
}

struct Harness {
    net: Sequential,
    input: Tensor,
    objective: Objective,
    mode: Mode,
    seed: u64,
}

impl Harness {
    /// Every call replays the same random stream, so dropout masks are
    /// identical across probes.
    fn forward(&mut self) -> Result<Tensor> {
        let mut rng = Rng::seed_from_u64(self.seed);
        self.net.forward(&self.input, self.mode, &mut rng)
    }

    fn loss(&mut self) -> Result<(f64, Vec<u32>)> {
        let out = self.forward()?;
        let l = match &self.objective {
            Objective::CrossEntropy(t) => {
                let p = loss::softmax_rows(&view2(&out, "gradcheck", "(batch, classes)")?);
                loss::cross_entropy(&p, t)?
            }
            Objective::Projection(r) => (&out * r).sum(),
        };
        Ok((l, self.net.kink_pattern()))
    }

    fn analytic(&mut self) -> Result<Tensor> {
        self.net.zero_grad();
        let out = self.forward()?;
        let upstream = match &self.objective {
            Objective::CrossEntropy(t) => {
                let p = loss::softmax_rows(&view2(&out, "gradcheck", "(batch, classes)")?);
                loss::loss_and_grad(&p, t)?.1.into_dyn()
            }
            Objective::Projection(r) => r.clone(),
        };
        Ok(self.net.backward(&upstream)?.as_standard_layout().into_owned())
    }

    /// Central difference at one coordinate, or `None` if either probe
    /// crossed a kink.
    fn probe(&mut self, eps: f64, base: &[u32], mut set: impl FnMut(&mut Self, f64)) -> Result<Option<f64>> {
        set(self, eps);
        let (lp, pp) = self.loss()?;
        set(self, -2.0 * eps);
        let (lm, pm) = self.loss()?;
        set(self, eps);
        if pp != base || pm != base {
            return Ok(None);
        }
        Ok(Some((lp - lm) / (2.0 * eps)))
    }

    fn run(&mut self, eps: f64) -> Result<GradCheckReport> {
        let input_grad = self.analytic()?;
        let analytic_params: Vec<Vec<Array2<f64>>> = self
            .net
            .layers
            .iter()
            .map(|l| {
                l.params()
                    .iter()
                    .map(|p| p.grad.clone().unwrap_or_else(|| Array2::zeros(p.value.dim())))
                    .collect()
            })
            .collect();
        let (_, base) = self.loss()?;
        let mut rng = Rng::seed_from_u64(self.seed ^ 0x9e37_79b9);
        let mut layers = Vec::new();

        for (li, grads) in analytic_params.iter().enumerate() {
            let mut coords: Vec<(usize, usize, usize)> = grads
                .iter()
                .enumerate()
                .flat_map(|(pi, g)| {
                    let cols = g.ncols();
                    (0..g.len()).map(move |j| (pi, j / cols, j % cols))
                })
                .collect();
            if coords.is_empty() {
                continue;
            }
            coords.shuffle(&mut rng);
            let mut check = LayerCheck {
                layer: format!("{}#{li}", self.net.layers[li].kind()),
                max_rel_error: 0.0,
                checked: 0,
                kinks_skipped: 0,
            };
            for (pi, r, c) in coords {
                if check.checked == MAX_SAMPLES_PER_LAYER {
                    break;
                }
                let numeric = self.probe(eps, &base, |h, d| {
                    h.net.layers[li].params_mut()[pi].value[[r, c]] += d;
                })?;
                match numeric {
                    Some(n) => {
                        check.max_rel_error = check.max_rel_error.max(rel_error(grads[pi][[r, c]], n));
                        check.checked += 1;
                    }
                    None => check.kinks_skipped += 1,
                }
            }
            layers.push(check);
        }

        if self.net.layers.first().is_some_and(|l| l.input_is_differentiable()) {
            let mut idx: Vec<usize> = (0..self.input.len()).collect();
            idx.shuffle(&mut rng);
            let mut check = LayerCheck {
                layer: "input".to_string(),
                max_rel_error: 0.0,
                checked: 0,
                kinks_skipped: 0,
            };
            let analytic = input_grad.as_slice().expect("standard layout").to_vec();
            for j in idx {
                if check.checked == MAX_SAMPLES_PER_LAYER {
                    break;
                }
                let numeric = self.probe(eps, &base, |h, d| {
                    h.input.as_slice_mut().expect("standard layout")[j] += d;
                })?;
                match numeric {
                    Some(n) => {
                        check.max_rel_error = check.max_rel_error.max(rel_error(analytic[j], n));
                        check.checked += 1;
                    }
                    None => check.kinks_skipped += 1,
                }
            }
            layers.push(check);
        }

        let max_rel_error = layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max);
        Ok(GradCheckReport { max_rel_error, layers })
    }
}

/// Checks a whole network under softmax cross-entropy in eval mode (dropout
/// off), sampling at most [`MAX_SAMPLES_PER_LAYER`] parameters per layer.
/// Probes that flip a ReLU or max-pool decision are skipped and replaced by
/// another sample. Parameter values are restored afterwards.
pub fn gradient_check(
    net: &mut Sequential,
    input: &Tensor,
    targets: &Array2<f64>,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut h = Harness {
        net: net.clone(),
        input: input.as_standard_layout().into_owned(),
        objective: Objective::CrossEntropy(targets.clone()),
        mode: Mode::Eval,
        seed,
    };
    let report = h.run(eps)?;
    net.zero_grad();
    Ok(report)
}

/// Checks one layer against the objective `Σ r ⊙ layer(x)` with a fixed
/// Gaussian `r`, including the gradient with respect to `x`. In
/// [`Mode::Train`] the dropout mask is held fixed across probes.
pub fn check_layer(layer: &Node, input: &Tensor, mode: Mode, eps: f64, seed: u64) -> Result<GradCheckReport> {
    let mut net = Sequential::new(vec![layer.clone()]);
    let out = net.forward(input, mode, &mut Rng::seed_from_u64(seed))?;
    let mut rng = Rng::seed_from_u64(seed.wrapping_add(1));
    let r = ArrayD::from_shape_simple_fn(out.raw_dim(), || StandardNormal.sample(&mut rng));
    let mut h = Harness {
        net,
        input: input.as_standard_layout().into_owned(),
        objective: Objective::Projection(r),
        mode,
        seed,
    };
    h.run(eps)
}
