use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::Param;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam. Moment buffers are matched to parameters by
/// position, so the same parameter list order must be passed every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update from the accumulated gradients. Fails without
    /// touching anything if any parameter has no gradient.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if params.iter().any(|p| p.grad.is_none()) {
            return Err(Error::MissingGradients);
        }
        if self.m.len() != params.len() {
            self.m = params.iter().map(|p| Array2::zeros(p.value.dim())).collect();
            self.v = self.m.clone();
            self.t = 0;
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.as_ref().expect("checked above");
            Zip::from(&mut p.value).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn scalar(v: f64, g: Option<f64>) -> Param {
        let mut p = Param::new("x", arr2(&[[v]]));
        p.grad = g.map(|g| arr2(&[[g]]));
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.5, Some(1.0));
        let mut adam = Adam::new(0.001);
        adam.step(&mut [&mut p]).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps)
        let want = 0.5 - 0.001 / (1.0 + 1e-8);
        assert!((p.value[[0, 0]] - want).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(0.5, Some(0.0));
        let mut adam = Adam::new(0.1);
        for _ in 0..3 {
            adam.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value[[0, 0]], 0.5);
    }

    #[test]
    fn missing_gradient() {
        let mut a = scalar(0.5, Some(1.0));
        let mut b = scalar(0.5, None);
        let err = Adam::new(0.1).step(&mut [&mut a, &mut b]);
        assert!(matches!(err, Err(Error::MissingGradients)));
        assert_eq!(a.value[[0, 0]], 0.5);
    }

    #[test]
    fn constant_gradient_keeps_unit_steps() {
        let mut p = scalar(0.0, Some(2.0));
        let mut adam = Adam::new(0.01);
        for _ in 0..5 {
            adam.step(&mut [&mut p]).unwrap();
        }
        assert!((p.value[[0, 0]] + 0.05).abs() < 1e-9);
    }
}
