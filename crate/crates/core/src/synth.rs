//! Single-shot far-field intensity frames with Gaussian field statistics.
//!
//! Every frame draws one unit-variance circular complex Gaussian amplitude
//! per Schmidt mode and evaluates `E(θ, φ) = Σ c_lp √Λ_lp u_lp(θ) e^{ilφ} / √θ`
//! at each pixel centre. Draws come from a counter-based generator keyed by
//! `(seed, frame index, mode index)`, so frames can be produced in any order
//! and on any number of threads without changing a single bit.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::model::{FrameGeometry, ModeBasis, ModeIndex, SchmidtSpectrum, SpectrumKind};
use crate::num::{count, lit, to_f64, Real};

/// One camera exposure: nonnegative intensities, row-major with `iy` as row.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pixels: Array2<f32>,
    geometry: FrameGeometry<f64>,
}

impl Frame {
    pub fn new(pixels: Array2<f32>, geometry: FrameGeometry<f64>) -> Result<Self> {
        if pixels.dim() != (geometry.height, geometry.width) {
            return Err(Error::Shape(format!(
                "pixel array is {:?}, calibration expects {}x{}",
                pixels.dim(),
                geometry.height,
                geometry.width
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(param("pixels", format!("intensity must be finite and nonnegative, found {v}")));
        }
        Ok(Self { pixels, geometry })
    }

    pub fn zeros(geometry: FrameGeometry<f64>) -> Self {
        Self {
            pixels: Array2::zeros((geometry.height, geometry.width)),
            geometry,
        }
    }

    pub fn pixels(&self) -> &Array2<f32> {
        &self.pixels
    }

    pub fn geometry(&self) -> &FrameGeometry<f64> {
        &self.geometry
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f32 {
        self.pixels[(iy, ix)]
    }

    pub fn into_pixels(self) -> Array2<f32> {
        self.pixels
    }
}

/// Where a stack came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StackMetadata {
    pub seed: Option<u64>,
    pub source: String,
}

/// Frames sharing one calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    geometry: FrameGeometry<f64>,
    frames: Vec<Frame>,
    metadata: StackMetadata,
}

impl FrameStack {
    pub fn new(frames: Vec<Frame>, metadata: StackMetadata) -> Result<Self> {
        let first = frames
            .first()
            .ok_or(Error::InsufficientData { have: 0, need: 1 })?;
        let geometry = first.geometry;
        if let Some(i) = frames.iter().position(|f| f.geometry != geometry) {
            return Err(Error::Shape(format!("frame {i} has a different calibration")));
        }
        Ok(Self {
            geometry,
            frames,
            metadata,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry<f64> {
        &self.geometry
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn metadata(&self) -> &StackMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pixelwise ensemble mean accumulated in `f64`.
    pub fn mean_frame(&self) -> Array2<f64> {
        let mut acc = Array2::<f64>::zeros((self.geometry.height, self.geometry.width));
        for f in &self.frames {
            acc.zip_mut_with(&f.pixels, |a, &v| *a += f64::from(v));
        }
        acc / self.frames.len() as f64
    }
}

/// Camera imperfections added after synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of additive Gaussian read noise per pixel.
    pub electronic_sigma: f64,
    /// Constant offset added to every pixel.
    pub background: f64,
    pub enabled: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            electronic_sigma: 0.0,
            background: 0.0,
            enabled: false,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.electronic_sigma >= 0.0) || !self.electronic_sigma.is_finite() {
            return Err(param("electronic_sigma", "must be finite and nonnegative"));
        }
        if !(self.background >= 0.0) || !self.background.is_finite() {
            return Err(param("background", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Which beams reach the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamMode {
    /// One of the twin beams only (band-pass filtered detection).
    #[default]
    Signal,
    /// Signal plus the idler emitted towards the mirrored angle `-q`.
    Twin,
}

const PURPOSE_FIELD: u64 = 0;
const PURPOSE_NOISE: u64 = 1;
const MAX_TEMPORAL_MODES: u32 = 1 << 15;

fn stream_id(frame: u64, purpose: u64, temporal: u32) -> u64 {
    (frame << 16) | (purpose << 15) | u64::from(temporal)
}

#[inline]
fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-variance circular complex Gaussian from exactly two `u64` draws.
#[inline]
fn complex_gaussian<T: Real>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let u1 = unit_interval(rng.next_u64());
    let u2 = unit_interval(rng.next_u64());
    let r = (-(1.0 - u1).ln()).sqrt();
    let a = std::f64::consts::TAU * u2;
    Complex::new(lit(r * a.cos()), lit(r * a.sin()))
}

#[inline]
fn real_gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_interval(rng.next_u64());
    let u2 = unit_interval(rng.next_u64());
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Complex amplitude of `mode` in frame `frame`, temporal slot `temporal`.
pub fn mode_amplitude<T: Real>(seed: u64, frame: u64, temporal: u32, mode: ModeIndex) -> Complex<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(frame, PURPOSE_FIELD, temporal));
    rng.set_word_pos(u128::from(mode.key()) * 4);
    complex_gaussian(&mut rng)
}

struct Member<T> {
    mode: ModeIndex,
    amplitude: T,
    profile: Vec<T>,
}

struct PixelTap<T> {
    index: usize,
    frac: T,
    inv_sqrt_theta: T,
    phase_step: Complex<T>,
    phase_start: Complex<T>,
}

/// Precomputed frame generator for one output spectrum, basis and camera.
pub struct FieldSynth<T> {
    geometry: FrameGeometry<T>,
    l_min: i32,
    /// Members grouped by `l`, index `l - l_min`.
    groups: Vec<Vec<Member<T>>>,
    n_samples: usize,
    taps: Vec<Option<PixelTap<T>>>,
    seed: u64,
    beam: BeamMode,
    temporal_modes: u32,
}

impl<T: Real> FieldSynth<T> {
    pub fn new(
        output: &SchmidtSpectrum<T>,
        basis: &ModeBasis<T>,
        geometry: FrameGeometry<T>,
        seed: u64,
    ) -> Result<Self> {
        output.require(SpectrumKind::OutputLambda)?;
        basis.check_covers(output)?;
        let grid = basis.grid();
        let reach = geometry.max_theta();
        if reach > grid.theta_max {
            return Err(Error::Domain {
                value: to_f64(reach),
                min: to_f64(grid.theta_min),
                max: to_f64(grid.theta_max),
            });
        }

        let active: Vec<(ModeIndex, T)> = output.iter().filter(|(_, w)| *w > T::zero()).collect();
        let l_min = active.iter().map(|(m, _)| m.l).min().unwrap_or(0);
        let l_max = active.iter().map(|(m, _)| m.l).max().unwrap_or(0);
        let mut groups: Vec<Vec<Member<T>>> = (l_min..=l_max).map(|_| Vec::new()).collect();

        let floor = grid.theta_floor();
        let mut taps = Vec::with_capacity(geometry.n_pixels());
        let mut n_samples = 0;
        for iy in 0..geometry.height {
            for ix in 0..geometry.width {
                let (theta, phi) = geometry.polar(ix, iy);
                if theta < grid.theta_min {
                    taps.push(None);
                    continue;
                }
                let (index, frac) = grid.interp_index(theta);
                n_samples = n_samples.max(index + 2);
                let step = Complex::from_polar(T::one(), phi);
                taps.push(Some(PixelTap {
                    index,
                    frac,
                    inv_sqrt_theta: theta.max(floor).sqrt().recip(),
                    phase_step: step,
                    phase_start: Complex::from_polar(T::one(), phi * count_signed::<T>(l_min)),
                }));
            }
        }

        for (mode, w) in active {
            let profile = basis
                .profile(mode)
                .ok_or(Error::MissingMode { l: mode.l, p: mode.p })?;
            groups[(mode.l - l_min) as usize].push(Member {
                mode,
                amplitude: w.sqrt(),
                profile: profile[..n_samples].to_vec(),
            });
        }

        Ok(Self {
            geometry,
            l_min,
            groups,
            n_samples,
            taps,
            seed,
            beam: BeamMode::Signal,
            temporal_modes: 1,
        })
    }

    pub fn with_beam(mut self, beam: BeamMode) -> Self {
        self.beam = beam;
        self
    }

    /// Number of independent temporal modes averaged within one exposure.
    /// One gives pure thermal statistics; `M` reduces the single-pixel
    /// excess noise to `g² = 1 + 1/M`.
    pub fn with_temporal_modes(mut self, modes: u32) -> Result<Self> {
        if modes == 0 || modes > MAX_TEMPORAL_MODES {
            return Err(param(
                "temporal_modes",
                format!("must lie in [1, {MAX_TEMPORAL_MODES}], got {modes}"),
            ));
        }
        self.temporal_modes = modes;
        Ok(self)
    }

    pub fn geometry(&self) -> &FrameGeometry<T> {
        &self.geometry
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beam(&self) -> BeamMode {
        self.beam
    }

    /// Radial field components `R_l(θ_k) = Σ_p c_lp √Λ_lp u_lp(θ_k)`.
    fn radial_components(&self, frame: u64, temporal: u32) -> Vec<Vec<Complex<T>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(frame, PURPOSE_FIELD, temporal));
        self.groups
            .iter()
            .map(|members| {
                let mut r = vec![Complex::new(T::zero(), T::zero()); self.n_samples];
                for m in members {
                    rng.set_word_pos(u128::from(m.mode.key()) * 4);
                    let c: Complex<T> = complex_gaussian(&mut rng);
                    let c = c * m.amplitude;
                    for (acc, &u) in r.iter_mut().zip(&m.profile) {
                        *acc += c * u;
                    }
                }
                r
            })
            .collect()
    }

    /// Intensity of frame `index` with values in `T`, row-major.
    pub fn intensity(&self, index: u64) -> Vec<T> {
        let mut out = vec![T::zero(); self.taps.len()];
        for t in 0..self.temporal_modes {
            let radial = self.radial_components(index, t);
            for (px, tap) in out.iter_mut().zip(&self.taps) {
                let Some(tap) = tap else { continue };
                let mut z = tap.phase_start;
                let mut sum = Complex::new(T::zero(), T::zero());
                let mut mirrored = Complex::new(T::zero(), T::zero());
                let mut sign = if self.l_min % 2 == 0 { T::one() } else { -T::one() };
                let g = T::one() - tap.frac;
                for r in &radial {
                    let v = (r[tap.index] * g + r[tap.index + 1] * tap.frac) * z;
                    sum += v;
                    mirrored += v * sign;
                    z *= tap.phase_step;
                    sign = -sign;
                }
                let mut i = sum.norm_sqr();
                if self.beam == BeamMode::Twin {
                    // Idler leaves towards -q: E_i(q) = conj(E_s(-q)), and
                    // e^{il(φ+π)} = (-1)^l e^{ilφ}.
                    i += mirrored.norm_sqr();
                }
                *px += i * tap.inv_sqrt_theta * tap.inv_sqrt_theta;
            }
        }
        if self.temporal_modes > 1 {
            let m = count::<T>(self.temporal_modes as usize);
            out.iter_mut().for_each(|v| *v /= m);
        }
        out
    }

    /// Frame `index` stored as 32-bit intensities.
    pub fn frame(&self, index: u64) -> Frame {
        let g = self.geometry.cast::<f64>();
        let data: Vec<f32> = self
            .intensity(index)
            .into_iter()
            .map(|v| to_f64(v) as f32)
            .collect();
        let pixels = Array2::from_shape_vec((g.height, g.width), data)
            .expect("tap table matches the frame size");
        Frame { pixels, geometry: g }
    }
}

fn count_signed<T: Real>(v: i32) -> T {
    lit(f64::from(v))
}

/// One filtered (single-beam) frame.
pub fn sample_signal_frame<T: Real>(
    output: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    geometry: FrameGeometry<T>,
    seed: u64,
) -> Result<Frame> {
    Ok(FieldSynth::new(output, basis, geometry, seed)?.frame(0))
}

/// One unfiltered frame containing both twin beams.
pub fn sample_twin_frame<T: Real>(
    output: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    geometry: FrameGeometry<T>,
    seed: u64,
) -> Result<Frame> {
    Ok(FieldSynth::new(output, basis, geometry, seed)?
        .with_beam(BeamMode::Twin)
        .frame(0))
}

/// Adds background and read noise, then clamps at zero.
pub fn add_noise(frame: &Frame, noise: &NoiseModel, seed: u64, index: u64) -> Result<Frame> {
    noise.validate()?;
    if !noise.enabled {
        return Ok(frame.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(index, PURPOSE_NOISE, 0));
    let mut out = frame.clone();
    for v in out.pixels.iter_mut() {
        let mut x = f64::from(*v) + noise.background;
        if noise.electronic_sigma > 0.0 {
            x += noise.electronic_sigma * real_gaussian(&mut rng);
        }
        *v = x.max(0.0) as f32;
    }
    Ok(out)
}

/// Frames `0..n_frames` of a generator with optional noise, computed in
/// parallel; the result does not depend on the thread count.
pub fn simulate_stack<T: Real>(
    synth: &FieldSynth<T>,
    n_frames: usize,
    noise: &NoiseModel,
) -> Result<FrameStack> {
    if n_frames == 0 {
        return Err(param("n_frames", "must be at least 1"));
    }
    noise.validate()?;
    let seed = synth.seed();
    let frames = (0..n_frames as u64)
        .into_par_iter()
        .map(|i| add_noise(&synth.frame(i), noise, seed, i))
        .collect::<Result<Vec<_>>>()?;
    FrameStack::new(
        frames,
        StackMetadata {
            seed: Some(seed),
            source: format!("synthetic ({:?} beam)", synth.beam()),
        },
    )
}

/// Per-mode amplitudes drawn for one frame, for diagnostics and tests.
pub fn frame_amplitudes<T: Real>(
    output: &SchmidtSpectrum<T>,
    seed: u64,
    frame: u64,
) -> BTreeMap<ModeIndex, Complex<T>> {
    output
        .iter()
        .map(|(m, _)| (m, mode_amplitude(seed, frame, 0, m)))
        .collect()
}
