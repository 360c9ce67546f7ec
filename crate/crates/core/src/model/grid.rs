use crate::error::{param, Error, Result};
use crate::num::{count, lit, wrap_two_pi, Real};

/// Calibration of a Cartesian camera frame in far-field angle units.
///
/// Pixel `(ix, iy)` sits at `x = (ix - center.0) * pitch`,
/// `y = (iy - center.1) * pitch`; storage is row-major with `iy` as the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry<T> {
    pub width: usize,
    pub height: usize,
    /// Angular pitch in rad/pixel.
    pub pitch: T,
    /// Pixel coordinates of the optical axis.
    pub center: (T, T),
}

impl<T: Real> FrameGeometry<T> {
    pub fn new(width: usize, height: usize, pitch: T, center: (T, T)) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(param("width/height", "frame dimensions must be positive"));
        }
        if !(pitch > T::zero()) || !pitch.is_finite() {
            return Err(param("pitch", format!("must be positive, got {pitch}")));
        }
        Ok(Self {
            width,
            height,
            pitch,
            center,
        })
    }

    /// Square frame with the optical axis on the central pixel.
    pub fn centered(size: usize, pitch: T) -> Result<Self> {
        let c = count::<T>(size / 2);
        Self::new(size, size, pitch, (c, c))
    }

    /// Same calibration in another scalar type.
    pub fn cast<U: Real>(&self) -> FrameGeometry<U> {
        let c = |v: T| U::from_f64(crate::num::to_f64(v)).unwrap_or_else(U::nan);
        FrameGeometry {
            width: self.width,
            height: self.height,
            pitch: c(self.pitch),
            center: (c(self.center.0), c(self.center.1)),
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Cartesian angles `(qx/k, qy/k)` of a pixel centre.
    #[inline]
    pub fn position(&self, ix: usize, iy: usize) -> (T, T) {
        (
            (count::<T>(ix) - self.center.0) * self.pitch,
            (count::<T>(iy) - self.center.1) * self.pitch,
        )
    }

    /// Polar angles `(θ, φ)` of a pixel centre, `φ ∈ [0, 2π)`.
    #[inline]
    pub fn polar(&self, ix: usize, iy: usize) -> (T, T) {
        let (x, y) = self.position(ix, iy);
        (x.hypot(y), wrap_two_pi(y.atan2(x)))
    }

    /// Converts a Cartesian angle position into fractional pixel coordinates.
    #[inline]
    pub fn to_pixel(&self, x: T, y: T) -> (T, T) {
        (x / self.pitch + self.center.0, y / self.pitch + self.center.1)
    }

    /// Largest radial angle reached by any pixel centre.
    pub fn max_theta(&self) -> T {
        let w = count::<T>(self.width - 1);
        let h = count::<T>(self.height - 1);
        let dx = self.center.0.abs().max((w - self.center.0).abs());
        let dy = self.center.1.abs().max((h - self.center.1).abs());
        dx.hypot(dy) * self.pitch
    }

    /// Radius of the largest circle around the axis whose samples keep a
    /// margin of `margin` pixels from the frame border.
    pub fn inscribed_theta(&self, margin: T) -> T {
        let w = count::<T>(self.width - 1);
        let h = count::<T>(self.height - 1);
        let r = self
            .center
            .0
            .min(w - self.center.0)
            .min(self.center.1)
            .min(h - self.center.1);
        (r - margin).max(T::zero()) * self.pitch
    }
}

/// Polar sampling grid in far-field angles.
///
/// Radial bins are uniform on `[theta_min, theta_max]` and sampled at their
/// centres; azimuthal bins are uniform and periodic with centres at
/// `k · 2π / n_phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid<T> {
    pub theta_min: T,
    pub theta_max: T,
    pub n_theta: usize,
    pub n_phi: usize,
    pub cartesian: Option<FrameGeometry<T>>,
}

impl<T: Real> PolarGrid<T> {
    pub fn new(theta_min: T, theta_max: T, n_theta: usize, n_phi: usize) -> Result<Self> {
        if !(theta_min >= T::zero()) {
            return Err(param("theta_min", "must be nonnegative"));
        }
        if !(theta_max > theta_min) {
            return Err(param("theta_max", "must exceed theta_min"));
        }
        if n_theta < 2 {
            return Err(param("n_theta", "need at least 2 radial bins"));
        }
        if n_phi < 4 {
            return Err(param("n_phi", "need at least 4 azimuthal bins"));
        }
        Ok(Self {
            theta_min,
            theta_max,
            n_theta,
            n_phi,
            cartesian: None,
        })
    }

    /// Grid starting at the axis and reaching every pixel of `frame`.
    pub fn covering(frame: FrameGeometry<T>, n_theta: usize, n_phi: usize) -> Result<Self> {
        let reach = frame.max_theta() + frame.pitch;
        let mut grid = Self::new(T::zero(), reach, n_theta, n_phi)?;
        grid.cartesian = Some(frame);
        Ok(grid)
    }

    pub fn d_theta(&self) -> T {
        (self.theta_max - self.theta_min) / count(self.n_theta)
    }

    pub fn d_phi(&self) -> T {
        T::TAU() / count(self.n_phi)
    }

    pub fn theta(&self, i: usize) -> T {
        self.theta_min + (count::<T>(i) + lit(0.5)) * self.d_theta()
    }

    pub fn thetas(&self) -> Vec<T> {
        (0..self.n_theta).map(|i| self.theta(i)).collect()
    }

    pub fn phi(&self, k: usize) -> T {
        count::<T>(k % self.n_phi) * self.d_phi()
    }

    /// Azimuthal bin of an angle; periodic in 2π.
    pub fn phi_bin(&self, phi: T) -> usize {
        let f = wrap_two_pi(phi) / self.d_phi() + lit(0.5);
        f.floor().to_usize().unwrap_or(0) % self.n_phi
    }

    /// Radial floor used in place of θ for the `1/√θ` factor: half of the
    /// innermost bin.
    pub fn theta_floor(&self) -> T {
        self.theta_min + self.d_theta() * lit(0.5)
    }

    pub fn contains_theta(&self, theta: T) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }

    pub(crate) fn check_theta(&self, theta: T) -> Result<()> {
        if self.contains_theta(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                value: crate::num::to_f64(theta),
                min: crate::num::to_f64(self.theta_min),
                max: crate::num::to_f64(self.theta_max),
            })
        }
    }

    /// Lower sample index and linear fraction for interpolating a quantity
    /// sampled at bin centres. Angles between the grid edge and the outer
    /// centres clamp to the edge sample.
    #[inline]
    pub fn interp_index(&self, theta: T) -> (usize, T) {
        let f = (theta - self.theta_min) / self.d_theta() - lit(0.5);
        if f <= T::zero() {
            return (0, T::zero());
        }
        let last = self.n_theta - 1;
        let i = f.floor().to_usize().unwrap_or(last);
        if i >= last {
            (last - 1, T::one())
        } else {
            (i, f - count(i))
        }
    }
}
