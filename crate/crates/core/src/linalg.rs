//! Dense linear algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::instance::Point;

/// Row-per-point matrix.
pub fn to_matrix(points: &[Point]) -> DMatrix<f64> {
    let n = points.len();
    let d = points.first().map_or(0, |p| p.len());
    DMatrix::from_fn(n, d, |i, j| points[i][j])
}

pub fn to_points(m: &DMatrix<f64>) -> Vec<Point> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Thin SVD with singular values in descending order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Right singular vectors as rows.
    pub v_t: DMatrix<f64>,
}

pub fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("finite singular values")
    });
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    SortedSvd {
        u,
        singular_values,
        v_t,
    }
}

/// Largest singular value of `a` by power iteration on `aᵀa`.
///
/// Stops once the Rayleigh quotient changes by less than `rel_tol` (relative)
/// between iterations or after `max_iter` steps.
pub fn spectral_norm(a: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let d = a.ncols();
    if d == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let gram = a.transpose() * a;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = &gram * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // one more Rayleigh quotient on the final vector
    let final_lambda = v.dot(&(&gram * &v));
    final_lambda.max(lambda).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
        let s = sorted_svd(&a);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.singular_values.clone()));
        let rebuilt = &s.u * sigma * &s.v_t;
        assert!((rebuilt - a).norm() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0));
            let exact = sorted_svd(&a).singular_values[0];
            let approx = spectral_norm(&a, 1e-13, 100_000);
            assert!((exact - approx).abs() <= 1e-8 * exact);
        }
    }

    #[test]
    fn zero_matrix_has_zero_norm() {
        assert_eq!(spectral_norm(&DMatrix::zeros(3, 2), 1e-10, 100), 0.0);
    }
}
