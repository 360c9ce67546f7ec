use ndarray::Array2;

use crate::error::{param, Error, Result};
use crate::num::{lit, to_f64, Real};
use crate::recon::count::mode_count;
use crate::recon::eigen::symmetric_eigen;
use crate::stats::asymmetry;

/// Relative tolerance for the symmetry check on input covariances.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// How the sign of each reconstructed shape is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// The sample with the largest magnitude is positive.
    #[default]
    PositivePeak,
}

/// Radial mode shapes `u_p(θ)` and weights, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialModeSet<T> {
    pub thetas: Vec<T>,
    pub d_theta: T,
    /// `shapes[p][i]` is `u_p(θ_i)`, normalized so `Σ_i u_p(θ_i)² Δθ = 1`.
    pub shapes: Vec<Vec<T>>,
    /// Eigenvalues clamped at zero, descending.
    pub weights: Vec<T>,
    pub sign_convention: SignConvention,
}

impl<T: Real> RadialModeSet<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weights of the `k` strongest modes divided by their sum.
    pub fn normalized_weights(&self, k: usize) -> Result<Vec<T>> {
        let top = &self.weights[..k.min(self.weights.len())];
        let total: T = top.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::UndefinedCount);
        }
        Ok(top.iter().map(|w| *w / total).collect())
    }

    pub fn mode_count(&self) -> Result<T> {
        mode_count(self.weights.iter().copied())
    }

    /// Grid inner product `Σ u_a u_b Δθ`.
    pub fn inner(&self, a: usize, b: usize) -> T {
        self.shapes[a]
            .iter()
            .zip(&self.shapes[b])
            .map(|(x, y)| *x * *y)
            .sum::<T>()
            * self.d_theta
    }

    /// Largest deviation of the Gram matrix of the first `k` shapes from the
    /// identity.
    pub fn orthonormality_defect(&self, k: usize) -> T {
        let k = k.min(self.shapes.len());
        let mut worst = T::zero();
        for a in 0..k {
            for b in a..k {
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((self.inner(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Radial Schmidt modes from a covariance matrix on radial bins `thetas`
/// (uniformly spaced).
///
/// The clamped elementwise square root `S = √max(C, 0)` equals
/// `Σ_p Λ_p u_p(θ) u_p(θ′) / √(θθ′)`; with `D = diag(√(θ Δθ))` the matrix
/// `D S D` has eigenvectors `u_p √Δθ` and eigenvalues `Λ_p`.
pub fn radial_modes<T: Real>(cov: &Array2<T>, thetas: &[T]) -> Result<RadialModeSet<T>> {
    let (r, c) = cov.dim();
    if r != c || r != thetas.len() {
        return Err(Error::Shape(format!(
            "covariance is {r}x{c} for {} radial bins",
            thetas.len()
        )));
    }
    if r < 2 {
        return Err(Error::InsufficientData { have: r, need: 2 });
    }
    let d_theta = thetas[1] - thetas[0];
    let uniform = thetas
        .windows(2)
        .all(|w| ((w[1] - w[0]) - d_theta).abs() <= d_theta * lit(1e-6));
    if !(d_theta > T::zero()) || !uniform || !(thetas[0] > T::zero()) {
        return Err(param("thetas", "radial bins must be positive and uniformly spaced"));
    }
    let scale = cov.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tolerance = scale * lit(SYMMETRY_TOLERANCE);
    let deviation = asymmetry(cov);
    if deviation > tolerance {
        return Err(Error::NotSymmetric {
            deviation: to_f64(deviation),
            tolerance: to_f64(tolerance),
        });
    }
    let d: Vec<T> = thetas.iter().map(|t| (*t * d_theta).sqrt()).collect();
    let m = Array2::from_shape_fn((r, r), |(i, j)| {
        let s = (cov[(i, j)].max(T::zero()).sqrt() + cov[(j, i)].max(T::zero()).sqrt()) * lit(0.5);
        d[i] * s * d[j]
    });
    let (values, vectors) = symmetric_eigen(&m)?;
    let inv = d_theta.sqrt().recip();
    let shapes = (0..r)
        .map(|p| {
            let col: Vec<T> = vectors.column(p).iter().map(|v| *v * inv).collect();
            let peak = col
                .iter()
                .copied()
                .fold(T::zero(), |a, v| if v.abs() > a.abs() { v } else { a });
            if peak < T::zero() {
                col.into_iter().map(|v| -v).collect()
            } else {
                col
            }
        })
        .collect();
    Ok(RadialModeSet {
        thetas: thetas.to_vec(),
        d_theta,
        shapes,
        weights: values.into_iter().map(|v| v.max(T::zero())).collect(),
        sign_convention: SignConvention::PositivePeak,
    })
}

/// |overlap| between a reconstructed shape and a reference profile sampled
/// on the same bins, both normalized on the grid.
pub fn shape_overlap<T: Real>(shape: &[T], reference: &[T]) -> T {
    let dot: T = shape.iter().zip(reference).map(|(a, b)| *a * *b).sum();
    let na: T = shape.iter().map(|a| *a * *a).sum::<T>().sqrt();
    let nb: T = reference.iter().map(|b| *b * *b).sum::<T>().sqrt();
    (dot / (na * nb)).abs()
}
