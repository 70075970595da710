use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Added inside the log so a zero probability gives a large finite loss.
pub const LOSS_EPS: f64 = 1e-12;

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: &ArrayView2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

fn check_shapes(probs: &Array2<f64>, targets: &Array2<f64>) -> Result<()> {
    if probs.dim() != targets.dim() || probs.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "loss: probabilities {:?} vs targets {:?}",
            probs.shape(),
            targets.shape()
        )));
    }
    Ok(())
}

/// Mean over rows of `-Σ target · ln(prob + ε)`.
pub fn cross_entropy(probs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    check_shapes(probs, targets)?;
    let total: f64 = probs
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| -t * (p + LOSS_EPS).ln())
        .sum();
    Ok(total / probs.nrows() as f64)
}

/// Cross-entropy of softmax outputs and its gradient with respect to the
/// logits that produced them, `(p - t) / batch`.
pub fn loss_and_grad(probs: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let loss = cross_entropy(probs, targets)?;
    debug_assert!(probs.sum_axis(Axis(1)).iter().all(|s| (s - 1.0).abs() < 1e-6));
    let grad = (probs - targets) / probs.nrows() as f64;
    Ok((loss, grad))
}

/// Share of rows whose argmax (ties to the earlier column) matches the target's.
pub fn accuracy(probs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let argmax = |row: ndarray::ArrayView1<f64>| {
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best
    };
    let hits = probs
        .rows()
        .into_iter()
        .zip(targets.rows())
        .filter(|(p, t)| argmax(*p) == argmax(*t))
        .count();
    hits as f64 / probs.nrows().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    #[test]
    fn uniform_prediction_costs_ln3() {
        let p = Array2::from_elem((2, 3), 1.0 / 3.0);
        let t = arr2(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let (loss, _) = loss_and_grad(&p, &t).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-9);
        assert!((loss - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn perfect_prediction_costs_nothing() {
        let t = arr2(&[[0.0, 1.0, 0.0]]);
        let (loss, grad) = loss_and_grad(&t, &t).unwrap();
        assert!(loss.abs() < 1e-11);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let p = Array2::from_elem((2, 3), 1.0 / 3.0);
        let t = Array2::zeros((1, 3));
        assert!(matches!(loss_and_grad(&p, &t), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let z = arr2(&[[0.3, -1.2, 0.8], [2.0, 0.1, -0.4], [-0.7, -0.7, 0.5]]);
        let t = arr2(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let f = |z: &Array2<f64>| cross_entropy(&softmax_rows(&z.view()), &t).unwrap();
        let (_, g) = loss_and_grad(&softmax_rows(&z.view()), &t).unwrap();
        let h = 1e-5;
        for idx in [(0, 0), (0, 2), (1, 1), (2, 0), (2, 2)] {
            let mut zp = z.clone();
            zp[idx] += h;
            let mut zm = z.clone();
            zm[idx] -= h;
            let num = (f(&zp) - f(&zm)) / (2.0 * h);
            assert!((num - g[idx]).abs() / num.abs().max(g[idx].abs()) < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(v in proptest::collection::vec(-15.0f64..15.0, 6)) {
            let z = Array2::from_shape_vec((2, 3), v).unwrap();
            let p = softmax_rows(&z.view());
            for row in p.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-6);
                prop_assert!(row.iter().all(|&x| x > 0.0 && x < 1.0));
            }
            let t = arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
            prop_assert!(cross_entropy(&p, &t).unwrap() >= 0.0);
        }
    }
}
