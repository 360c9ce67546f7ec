use num_traits::ToPrimitive;

use crate::error::{param, Error, Result};
use crate::model::FrameGeometry;
use crate::num::{count, lit, to_f64, wrap_pi, wrap_two_pi, Real};
use crate::synth::Frame;

/// Geometry of a one-dimensional cut through the frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceKind<T> {
    /// Ring at radial angle `theta0`; bins run over `φ_k = 2πk/resolution`.
    Azimuthal { theta0: T },
    /// Ray at azimuth `phi0`; bins have centres `θ_i = theta_min + (i + ½)Δθ`
    /// with `Δθ = (theta_max − theta_min)/resolution`.
    Radial { phi0: T, theta_min: T, theta_max: T },
}

/// How pixel intensities are carried onto the slice bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Keys cubic convolution (`a = −½`) of the image at polar sample points.
    #[default]
    Bicubic,
    /// Bilinear interpolation of the image at polar sample points.
    Bilinear,
    /// Each pixel is split between its two neighbouring bins along the slice
    /// with weights linear in its distance, after weighting by the fraction
    /// of the pixel that falls inside the integration band.
    PixelBinning,
}

/// A slice: its geometry, the half-range integrated across it and the number
/// of bins along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSpec<T> {
    pub kind: SliceKind<T>,
    /// Half-range of the band across the slice: rad in θ for azimuthal
    /// slices, rad in φ for radial slices.
    pub halfwidth: T,
    pub resolution: usize,
    pub interpolation: Interpolation,
}

/// Largest spacing between sub-samples across the band, in pixels.
const SUBSAMPLE_SPACING: f64 = 0.5;

impl<T: Real> SliceSpec<T> {
    pub fn azimuthal(theta0: T, halfwidth: T, resolution: usize) -> Self {
        Self {
            kind: SliceKind::Azimuthal { theta0 },
            halfwidth,
            resolution,
            interpolation: Interpolation::default(),
        }
    }

    pub fn radial(phi0: T, theta_min: T, theta_max: T, halfwidth: T, resolution: usize) -> Self {
        Self {
            kind: SliceKind::Radial {
                phi0,
                theta_min,
                theta_max,
            },
            halfwidth,
            resolution,
            interpolation: Interpolation::default(),
        }
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    /// Checks the intrinsic invariants; `floor` is the smallest radial angle
    /// the band may reach.
    pub fn validate(&self, floor: T) -> Result<()> {
        if !(self.halfwidth > T::zero()) || !self.halfwidth.is_finite() {
            return Err(param("halfwidth", format!("must be positive, got {}", self.halfwidth)));
        }
        if self.resolution < 8 {
            return Err(param("resolution", format!("need at least 8 bins, got {}", self.resolution)));
        }
        let slack = T::one() - lit(1e-9);
        match self.kind {
            SliceKind::Azimuthal { theta0 } => {
                if !(theta0 - self.halfwidth >= floor * slack) {
                    return Err(param(
                        "theta0",
                        format!(
                            "band [{} - {}] reaches below the radial floor {}",
                            theta0, self.halfwidth, floor
                        ),
                    ));
                }
            }
            SliceKind::Radial {
                phi0,
                theta_min,
                theta_max,
            } => {
                if !phi0.is_finite() {
                    return Err(param("phi0", "must be finite"));
                }
                if !(theta_max > theta_min) || !(theta_min >= T::zero()) {
                    return Err(param("theta range", "need 0 <= theta_min < theta_max"));
                }
                if self.halfwidth >= T::PI() {
                    return Err(param("halfwidth", "azimuthal band must be narrower than π"));
                }
            }
        }
        Ok(())
    }

    /// Bin centres along the slice: φ for azimuthal, θ for radial slices.
    pub fn centres(&self) -> Vec<T> {
        let n = count::<T>(self.resolution);
        match self.kind {
            SliceKind::Azimuthal { .. } => (0..self.resolution)
                .map(|k| T::TAU() * count::<T>(k) / n)
                .collect(),
            SliceKind::Radial {
                theta_min,
                theta_max,
                ..
            } => {
                let d = (theta_max - theta_min) / n;
                (0..self.resolution)
                    .map(|i| theta_min + (count::<T>(i) + lit(0.5)) * d)
                    .collect()
            }
        }
    }

    /// Spacing between bin centres.
    pub fn step(&self) -> T {
        let n = count::<T>(self.resolution);
        match self.kind {
            SliceKind::Azimuthal { .. } => T::TAU() / n,
            SliceKind::Radial {
                theta_min,
                theta_max,
                ..
            } => (theta_max - theta_min) / n,
        }
    }
}

/// Precomputed sparse map from pixels to slice bins; each bin is the
/// weighted mean of the pixels it touches, with weights summing to one.
#[derive(Debug, Clone)]
pub struct SliceSampler<T> {
    spec: SliceSpec<T>,
    width: usize,
    height: usize,
    bins: Vec<Vec<(usize, T)>>,
}

fn keys_kernel<T: Real>(t: T) -> T {
    let a = lit::<T>(-0.5);
    let t = t.abs();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    if t < T::one() {
        ((a + two) * t - (a + three)) * t * t + T::one()
    } else if t < two {
        ((a * t - lit::<T>(5.0) * a) * t + lit::<T>(8.0) * a) * t - lit::<T>(4.0) * a
    } else {
        T::zero()
    }
}

impl<T: Real> SliceSampler<T> {
    pub fn new(spec: SliceSpec<T>, geometry: &FrameGeometry<T>) -> Result<Self> {
        spec.validate(geometry.pitch * lit(0.5))?;
        let mut bins = match spec.interpolation {
            Interpolation::PixelBinning => binned_weights(&spec, geometry)?,
            interp => sampled_weights(&spec, geometry, interp)?,
        };
        for (k, bin) in bins.iter_mut().enumerate() {
            bin.sort_by_key(|(i, _)| *i);
            bin.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let total: T = bin.iter().map(|(_, w)| *w).sum();
            if !(total.abs() > T::epsilon()) {
                return Err(Error::SliceOutside(format!("bin {k} receives no pixels")));
            }
            bin.iter_mut().for_each(|(_, w)| *w /= total);
        }
        Ok(Self {
            spec,
            width: geometry.width,
            height: geometry.height,
            bins,
        })
    }

    pub fn spec(&self) -> &SliceSpec<T> {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Sparse `(pixel, weight)` list of one bin; pixels are row-major indices.
    pub fn bin_weights(&self, k: usize) -> &[(usize, T)] {
        &self.bins[k]
    }

    /// Profile from row-major pixel values of any numeric type.
    pub fn extract_values<P: ToPrimitive + Copy>(&self, pixels: &[P]) -> Result<Vec<T>> {
        if pixels.len() != self.width * self.height {
            return Err(Error::Shape(format!(
                "expected {} pixels, got {}",
                self.width * self.height,
                pixels.len()
            )));
        }
        Ok(self
            .bins
            .iter()
            .map(|bin| {
                bin.iter()
                    .map(|&(i, w)| w * T::from(pixels[i]).unwrap_or_else(T::nan))
                    .sum()
            })
            .collect())
    }

    pub fn extract(&self, frame: &Frame) -> Result<Vec<T>> {
        let px = frame.pixels();
        match px.as_slice() {
            Some(s) => self.extract_values(s),
            None => self.extract_values(&px.iter().copied().collect::<Vec<_>>()),
        }
    }
}

/// One-shot convenience around [`SliceSampler`].
pub fn extract_slice<T: Real>(frame: &Frame, spec: &SliceSpec<T>) -> Result<Vec<T>> {
    let geometry = frame.geometry().cast::<T>();
    SliceSampler::new(*spec, &geometry)?.extract(frame)
}

fn subsample_offsets<T: Real>(halfwidth: T, span_px: T) -> Vec<T> {
    // `span_px` is the band width in pixels.
    let n = (span_px / lit(SUBSAMPLE_SPACING)).ceil().to_usize().unwrap_or(0) + 1;
    let n = n.max(3);
    (0..n)
        .map(|j| -halfwidth + lit::<T>(2.0) * halfwidth * count::<T>(j) / count::<T>(n - 1))
        .collect()
}

fn sampled_weights<T: Real>(
    spec: &SliceSpec<T>,
    g: &FrameGeometry<T>,
    interp: Interpolation,
) -> Result<Vec<Vec<(usize, T)>>> {
    let centres = spec.centres();
    let mut bins = Vec::with_capacity(centres.len());
    for &c in &centres {
        let points: Vec<(T, T)> = match spec.kind {
            SliceKind::Azimuthal { theta0 } => {
                let span = lit::<T>(2.0) * spec.halfwidth / g.pitch;
                subsample_offsets(spec.halfwidth, span)
                    .into_iter()
                    .map(|d| (theta0 + d, c))
                    .collect()
            }
            SliceKind::Radial { phi0, .. } => {
                let span = lit::<T>(2.0) * spec.halfwidth * c / g.pitch;
                subsample_offsets(spec.halfwidth, span)
                    .into_iter()
                    .map(|d| (c, phi0 + d))
                    .collect()
            }
        };
        let norm = count::<T>(points.len()).recip();
        let mut bin = Vec::new();
        for (theta, phi) in points {
            let (fx, fy) = g.to_pixel(theta * phi.cos(), theta * phi.sin());
            stencil(g, fx, fy, interp, |i, w| bin.push((i, w * norm)))?;
        }
        bins.push(bin);
    }
    Ok(bins)
}

fn stencil<T: Real>(
    g: &FrameGeometry<T>,
    fx: T,
    fy: T,
    interp: Interpolation,
    mut push: impl FnMut(usize, T),
) -> Result<()> {
    let (lo, hi) = match interp {
        Interpolation::Bicubic => (-1i64, 2i64),
        _ => (0, 1),
    };
    let x0 = fx.floor().to_i64().unwrap_or(i64::MIN / 2);
    let y0 = fy.floor().to_i64().unwrap_or(i64::MIN / 2);
    if x0 + lo < 0 || y0 + lo < 0 || x0 + hi >= g.width as i64 || y0 + hi >= g.height as i64 {
        return Err(Error::SliceOutside(format!(
            "sample at pixel ({:.2}, {:.2}) needs pixels outside the {}x{} frame",
            to_f64(fx),
            to_f64(fy),
            g.width,
            g.height
        )));
    }
    let ax = fx - count::<T>(x0 as usize);
    let ay = fy - count::<T>(y0 as usize);
    for dy in lo..=hi {
        let wy = match interp {
            Interpolation::Bicubic => keys_kernel(ay - lit(dy as f64)),
            _ if dy == 0 => T::one() - ay,
            _ => ay,
        };
        for dx in lo..=hi {
            let wx = match interp {
                Interpolation::Bicubic => keys_kernel(ax - lit(dx as f64)),
                _ if dx == 0 => T::one() - ax,
                _ => ax,
            };
            let w = wx * wy;
            if w != T::zero() {
                let i = (y0 + dy) as usize * g.width + (x0 + dx) as usize;
                push(i, w);
            }
        }
    }
    Ok(())
}

fn binned_weights<T: Real>(spec: &SliceSpec<T>, g: &FrameGeometry<T>) -> Result<Vec<Vec<(usize, T)>>> {
    let n = spec.resolution;
    let step = spec.step();
    let half_px = g.pitch * lit(0.5);
    let mut bins: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let overlap = |centre: T, half: T, lo: T, hi: T| -> T {
        let a = (centre - half).max(lo);
        let b = (centre + half).min(hi);
        ((b - a) / (half + half)).max(T::zero())
    };
    // Band must lie inside the frame.
    let reach = match spec.kind {
        SliceKind::Azimuthal { theta0 } => theta0 + spec.halfwidth,
        SliceKind::Radial { theta_max, .. } => theta_max,
    };
    if reach > g.inscribed_theta(T::zero()) + half_px {
        return Err(Error::SliceOutside(format!(
            "band reaches {} rad, frame covers {} rad",
            to_f64(reach),
            to_f64(g.inscribed_theta(T::zero()))
        )));
    }
    for iy in 0..g.height {
        for ix in 0..g.width {
            let (theta, phi) = g.polar(ix, iy);
            let i = iy * g.width + ix;
            match spec.kind {
                SliceKind::Azimuthal { theta0 } => {
                    let w = overlap(theta, half_px, theta0 - spec.halfwidth, theta0 + spec.halfwidth);
                    if w == T::zero() {
                        continue;
                    }
                    let f = wrap_two_pi(phi) / step;
                    let k0 = f.floor().to_usize().unwrap_or(0);
                    let fr = f - count::<T>(k0);
                    bins[k0 % n].push((i, w * (T::one() - fr)));
                    bins[(k0 + 1) % n].push((i, w * fr));
                }
                SliceKind::Radial { phi0, theta_min, .. } => {
                    if theta <= T::zero() {
                        continue;
                    }
                    let d = wrap_pi(phi - phi0);
                    let half = half_px / theta;
                    let w = overlap(d, half, -spec.halfwidth, spec.halfwidth);
                    if w == T::zero() {
                        continue;
                    }
                    let f = (theta - theta_min) / step - lit(0.5);
                    let k0 = f.floor();
                    let fr = f - k0;
                    for (k, wk) in [(k0, T::one() - fr), (k0 + T::one(), fr)] {
                        if k >= T::zero() {
                            if let Some(k) = k.to_usize().filter(|&k| k < n) {
                                bins[k].push((i, w * wk));
                            }
                        }
                    }
                }
            }
        }
    }
    for bin in &mut bins {
        bin.retain(|(_, w)| *w != T::zero());
    }
    Ok(bins)
}
