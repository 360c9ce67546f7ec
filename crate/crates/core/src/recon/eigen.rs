use ndarray::Array2;

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the second value.
pub fn symmetric_eigen<T: Real>(matrix: &Array2<T>) -> Result<(Vec<T>, Array2<T>)> {
    let (n, m) = matrix.dim();
    if n != m {
        return Err(Error::Shape(format!("matrix is {n}x{m}, expected square")));
    }
    let mut a = matrix.clone();
    let mut v = Array2::<T>::eye(n);
    let scale: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = T::epsilon() * scale;
    let negligible = tol / crate::num::count::<T>(n.max(1) * n.max(1));
    let mut converged = n < 2 || scale == T::zero();
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= negligible {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (lit::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Shape(format!(
            "Jacobi iteration did not converge (off-diagonal norm scale {})",
            to_f64(scale)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[(r, order[c])]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_and_two_by_two() {
        let (w, _) = symmetric_eigen(&ndarray::arr2(&[[1.0, 0.0], [0.0, 3.0]])).unwrap();
        assert_eq!(w, vec![3.0, 1.0]);
        let (w, v) = symmetric_eigen(&ndarray::arr2(&[[2.0f64, 1.0], [1.0, 2.0]])).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        assert!((v[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [3, 10, 40] {
            let b = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() - 0.5);
            let a = &b + &b.t();
            let (w, v) = symmetric_eigen(&a).unwrap();
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
            let mut want: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
            want.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (x, y) in w.iter().zip(&want) {
                assert!((x - y).abs() < 1e-10);
            }
            // A v = w v and VᵀV = I.
            let av = a.dot(&v);
            for c in 0..n {
                for r in 0..n {
                    assert!((av[(r, c)] - w[c] * v[(r, c)]).abs() < 1e-10);
                }
            }
            let vtv = v.t().dot(&v);
            for ((i, j), x) in vtv.indexed_iter() {
                assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_precision() {
        let a = ndarray::arr2(&[[4.0f32, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]]);
        let (w, _) = symmetric_eigen(&a).unwrap();
        let trace: f32 = w.iter().sum();
        assert!((trace - 9.0).abs() < 1e-5);
        assert!(symmetric_eigen(&Array2::<f32>::zeros((2, 3))).is_err());
    }
}
