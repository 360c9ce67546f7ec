use ndarray::Array2;

use crate::error::{Error, Result};
use crate::num::{count, lit, Real};
use crate::stats::slice::SliceSpec;

/// Azimuthal covariance as a function of `Δφ = φ − φ′` after averaging
/// along `φ + φ′`.
///
/// The underlying data are periodic with period 2π and sampled at
/// `Δφ_d = d · 2π/n`; [`primary`](Self::primary) reports one period on
/// `(−π, π]` and [`extended`](Self::extended) the periodic continuation over
/// `(−2π, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCurve<T> {
    periodic: Vec<T>,
    n_frames: u64,
    spec: Option<SliceSpec<T>>,
}

impl<T: Real> CovarianceCurve<T> {
    /// `values[d]` is the covariance at `Δφ = d · 2π / values.len()`.
    pub fn from_periodic(values: Vec<T>, n_frames: u64, spec: Option<SliceSpec<T>>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Shape(format!("need at least 4 samples, got {}", values.len())));
        }
        Ok(Self {
            periodic: values,
            n_frames,
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.periodic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periodic.is_empty()
    }

    pub fn step(&self) -> T {
        T::TAU() / count(self.periodic.len())
    }

    pub fn n_frames(&self) -> u64 {
        self.n_frames
    }

    pub fn spec(&self) -> Option<&SliceSpec<T>> {
        self.spec.as_ref()
    }

    /// Samples at `Δφ = d · step` for `d = 0..n`.
    pub fn periodic(&self) -> &[T] {
        &self.periodic
    }

    /// Value at `Δφ = j · step`, any integer `j`.
    pub fn at(&self, j: i64) -> T {
        let n = self.periodic.len() as i64;
        self.periodic[j.rem_euclid(n) as usize]
    }

    fn range(&self, lo: i64, hi: i64) -> (Vec<T>, Vec<T>) {
        let step = self.step();
        (lo..=hi)
            .map(|j| (lit::<T>(j as f64) * step, self.at(j)))
            .unzip()
    }

    /// One period on `(−π, π]`, ascending in `Δφ`.
    pub fn primary(&self) -> (Vec<T>, Vec<T>) {
        let n = self.periodic.len() as i64;
        self.range(-((n - 1) / 2), n / 2)
    }

    /// Periodic continuation over `(−2π, 2π)`.
    pub fn extended(&self) -> (Vec<T>, Vec<T>) {
        let n = self.periodic.len() as i64;
        self.range(-(n - 1), n - 1)
    }
}

/// Averages a covariance matrix on a periodic azimuthal grid along its
/// anti-diagonals, so the result depends only on `φ − φ′`.
pub fn antidiagonal_average<T: Real>(
    cov: &Array2<T>,
    n_frames: u64,
    spec: Option<SliceSpec<T>>,
) -> Result<CovarianceCurve<T>> {
    let (r, c) = cov.dim();
    if r != c {
        return Err(Error::Shape(format!("covariance matrix is {r}x{c}, expected square")));
    }
    let n = r;
    let values = (0..n)
        .map(|d| {
            let s: T = (0..n).map(|i| cov[(i, (i + n - d) % n)]).sum();
            s / count(n)
        })
        .collect();
    CovarianceCurve::from_periodic(values, n_frames, spec)
}

/// Full width at half maximum of a curve's primary period.
///
/// The baseline is the median of the samples with `|Δφ| > 0.8π`; the width
/// is measured at half of `max − baseline` by linear interpolation.
pub fn fwhm<T: Real>(curve: &CovarianceCurve<T>) -> Result<T> {
    let (x, y) = curve.primary();
    fwhm_samples(&x, &y)
}

/// FWHM of a peaked curve sampled on an ascending axis; the baseline is the
/// median of the outer 10% of samples at each end.
pub fn fwhm_samples<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Shape("need at least 3 matching samples".into()));
    }
    let n = y.len();
    let tail = ((n as f64 * 0.1).round() as usize).max(1);
    let mut outer: Vec<T> = y[..tail].iter().chain(&y[n - tail..]).copied().collect();
    outer.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = outer.len();
    let baseline = if m % 2 == 1 {
        outer[m / 2]
    } else {
        (outer[m / 2 - 1] + outer[m / 2]) * lit(0.5)
    };
    let (peak, ymax) = y
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let height = ymax - baseline;
    if !(height > T::epsilon() * ymax.abs().max(baseline.abs())) {
        return Err(Error::UndefinedWidth);
    }
    let half = baseline + height * lit(0.5);
    let crossing = |i: usize, j: usize| -> T {
        // y[i] > half >= y[j]
        x[i] + (half - y[i]) / (y[j] - y[i]) * (x[j] - x[i])
    };
    let right = (peak + 1..n)
        .find(|&j| y[j] <= half)
        .map(|j| crossing(j - 1, j))
        .ok_or(Error::UndefinedWidth)?;
    let left = (0..peak)
        .rev()
        .find(|&j| y[j] <= half)
        .map(|j| crossing(j + 1, j))
        .ok_or(Error::UndefinedWidth)?;
    Ok(right - left)
}
