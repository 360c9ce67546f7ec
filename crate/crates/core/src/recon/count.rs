use crate::error::{param, Error, Result};
use crate::num::Real;

/// Participation ratio `1 / Σ w̃²` of the sum-normalized weights.
pub fn mode_count<T: Real>(weights: impl IntoIterator<Item = T>) -> Result<T> {
    let w: Vec<T> = weights.into_iter().collect();
    if w.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(param("weights", "must be finite and nonnegative"));
    }
    let total: T = w.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::UndefinedCount);
    }
    let sq: T = w.iter().map(|v| (*v / total) * (*v / total)).sum();
    Ok(sq.recip())
}

/// Mode counts from both slice orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCountReport<T> {
    /// `(θ₀, count)` for each probed ring.
    pub azimuthal: Vec<(T, T)>,
    /// Count of the radially averaged OAM spectrum.
    pub azimuthal_avg: T,
    pub radial: T,
    /// `azimuthal_avg × radial`.
    pub total: T,
    /// Counts use the full spectrum over `l` and `−l` rather than the folded
    /// `l ≥ 0` half.
    pub two_sided: bool,
}

pub fn total_mode_count<T: Real>(azimuthal: Vec<(T, T)>, azimuthal_avg: T, radial: T) -> ModeCountReport<T> {
    ModeCountReport {
        azimuthal,
        azimuthal_avg,
        radial,
        total: azimuthal_avg * radial,
        two_sided: true,
    }
}
