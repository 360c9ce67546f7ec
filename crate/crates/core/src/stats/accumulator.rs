use std::io::{Read, Write};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{lit, to_f64, Real};

const CHECKPOINT_MAGIC: &[u8; 4] = b"SMCA";
const CHECKPOINT_VERSION: u16 = 1;

/// Profiles per chunk in [`accumulate_parallel`]; fixed so the summation
/// order, and hence the result, does not depend on the thread count.
pub const PARALLEL_CHUNK: usize = 64;

/// Mergeable running sums for the sample covariance of fixed-length profiles.
///
/// Sums are taken about a per-bin shift (the first profile seen) to avoid
/// cancellation when the mean is large compared with the fluctuations.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator<T> {
    dim: usize,
    n: u64,
    shift: Vec<T>,
    sum: Vec<T>,
    /// Upper triangle of `Σ d dᵀ`, row-major.
    sum_outer: Vec<T>,
}

impl<T: Real> CovarianceAccumulator<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            n: 0,
            shift: vec![T::zero(); dim],
            sum: vec![T::zero(); dim],
            sum_outer: vec![T::zero(); dim * (dim + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn accumulate(&mut self, profile: &[T]) -> Result<()> {
        if profile.len() != self.dim {
            return Err(Error::Shape(format!(
                "profile has {} bins, accumulator expects {}",
                profile.len(),
                self.dim
            )));
        }
        if self.n == 0 {
            self.shift.copy_from_slice(profile);
        }
        let d: Vec<T> = profile.iter().zip(&self.shift).map(|(x, s)| *x - *s).collect();
        for (s, v) in self.sum.iter_mut().zip(&d) {
            *s += *v;
        }
        let mut k = 0;
        for i in 0..self.dim {
            let di = d[i];
            for &dj in &d[i..] {
                self.sum_outer[k] += di * dj;
                k += 1;
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Re-expresses the sums about a different shift.
    fn reshift(&mut self, shift: &[T]) {
        let delta: Vec<T> = self.shift.iter().zip(shift).map(|(a, b)| *a - *b).collect();
        let n = T::from_u64(self.n).unwrap_or_else(T::nan);
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                self.sum_outer[k] +=
                    delta[i] * self.sum[j] + self.sum[i] * delta[j] + n * delta[i] * delta[j];
                k += 1;
            }
        }
        for (s, d) in self.sum.iter_mut().zip(&delta) {
            *s += n * *d;
        }
        self.shift.copy_from_slice(shift);
    }

    /// Combines two accumulators; equivalent to having accumulated both
    /// profile sets into one.
    pub fn merge(mut self, mut other: Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "cannot merge accumulators of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        if other.n == 0 {
            return Ok(self);
        }
        if self.n == 0 {
            return Ok(other);
        }
        other.reshift(&self.shift);
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += *b;
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&other.sum_outer) {
            *a += *b;
        }
        self.n += other.n;
        Ok(self)
    }

    pub fn mean(&self) -> Result<Vec<T>> {
        if self.n == 0 {
            return Err(Error::InsufficientData { have: 0, need: 1 });
        }
        let n = T::from_u64(self.n).unwrap_or_else(T::nan);
        Ok(self.shift.iter().zip(&self.sum).map(|(s, d)| *s + *d / n).collect())
    }

    /// Unbiased sample covariance `Σ (x − x̄)(x − x̄)ᵀ / (n − 1)`.
    pub fn finalize(&self) -> Result<Array2<T>> {
        if self.n < 2 {
            return Err(Error::InsufficientData {
                have: self.n as usize,
                need: 2,
            });
        }
        let n = T::from_u64(self.n).unwrap_or_else(T::nan);
        let norm = (n - T::one()).recip();
        let mut c = Array2::zeros((self.dim, self.dim));
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = (self.sum_outer[k] - self.sum[i] * self.sum[j] / n) * norm;
                c[(i, j)] = v;
                c[(j, i)] = v;
                k += 1;
            }
        }
        Ok(c)
    }

    /// Writes a resumable little-endian checkpoint.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[std::mem::size_of::<T>() as u8])?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.n.to_le_bytes())?;
        for v in self.shift.iter().chain(&self.sum).chain(&self.sum_outer) {
            w.write_all(&to_f64(*v).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        if usize::from(b1[0]) != std::mem::size_of::<T>() {
            return Err(Error::Checkpoint(format!(
                "written with {}-byte scalars, reading as {}-byte",
                b1[0],
                std::mem::size_of::<T>()
            )));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8);
        let mut acc = Self::new(dim);
        acc.n = n;
        let mut read = |dst: &mut [T]| -> Result<()> {
            for v in dst {
                r.read_exact(&mut b8)
                    .map_err(|_| Error::Checkpoint("truncated payload".into()))?;
                *v = lit(f64::from_le_bytes(b8));
            }
            Ok(())
        };
        read(&mut acc.shift)?;
        read(&mut acc.sum)?;
        read(&mut acc.sum_outer)?;
        Ok(acc)
    }
}

/// Accumulates profiles in fixed-size chunks on the rayon pool and merges
/// the chunks in index order.
pub fn accumulate_parallel<T, F>(dim: usize, n: usize, profile: F) -> Result<CovarianceAccumulator<T>>
where
    T: Real,
    F: Fn(usize) -> Result<Vec<T>> + Sync,
{
    let chunks: Vec<CovarianceAccumulator<T>> = (0..n.div_ceil(PARALLEL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = CovarianceAccumulator::new(dim);
            for i in c * PARALLEL_CHUNK..((c + 1) * PARALLEL_CHUNK).min(n) {
                acc.accumulate(&profile(i)?)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    chunks
        .into_iter()
        .try_fold(CovarianceAccumulator::new(dim), |a, b| a.merge(b))
}

/// Largest |A − Aᵀ| entry.
pub fn asymmetry<T: Real>(m: &Array2<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
