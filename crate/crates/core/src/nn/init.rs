//! Weight initialisers.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Rng;

pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

/// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array2<f64> {
    uniform(rows, cols, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

/// Gaussian matrix whose shorter side is orthonormalised with modified
/// Gram-Schmidt, so `W Wᵀ = I` when `rows <= cols` and `Wᵀ W = I` otherwise.
pub fn orthogonal(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let (n, m) = (rows.min(cols), rows.max(cols));
    let mut q = Array2::from_shape_simple_fn((n, m), || rng.sample::<f64, _>(StandardNormal));
    for i in 0..n {
        for j in 0..i {
            let proj = q.row(i).dot(&q.row(j));
            let qj = q.row(j).to_owned();
            q.row_mut(i).scaled_add(-proj, &qj);
        }
        let norm = q.row(i).dot(&q.row(i)).sqrt();
        q.row_mut(i).mapv_inplace(|v| v / norm);
    }
    if rows <= cols {
        q
    } else {
        q.reversed_axes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn orthogonal_rows_and_columns() {
        let mut rng = Rng::seed_from_u64(3);
        for (r, c) in [(4, 16), (16, 4), (5, 5)] {
            let w = orthogonal(r, c, &mut rng);
            assert_eq!(w.dim(), (r, c));
            let gram = if r <= c { w.dot(&w.t()) } else { w.t().dot(&w) };
            for ((i, j), v) in gram.indexed_iter() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = Rng::seed_from_u64(0);
        let w = glorot_uniform(10, 20, 10, 20, &mut rng);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
    }
}
