use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{param, Error, Result};
use crate::model::{ModeBasis, SchmidtSpectrum, SpectrumKind};
use crate::num::{count, lit, to_f64, Real};
use crate::recon::count::mode_count;
use crate::stats::{CovarianceCurve, SliceKind};

/// Largest tolerated ratio of imaginary to real Fourier norm.
pub const ASYMMETRY_LIMIT: f64 = 0.01;

/// Where an OAM spectrum was measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OamContext<T> {
    /// Single ring at radial angle θ₀ (rad); `None` if the curve carried no
    /// slice description.
    Ring(Option<T>),
    /// Integrated over the probed radial angles.
    RadiallyAveraged,
    /// Computed from a known spectrum.
    GroundTruth,
}

/// Weights per OAM charge `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct OamSpectrum<T> {
    pub weights: BTreeMap<i32, T>,
    pub context: OamContext<T>,
    pub normalized: bool,
}

impl<T: Real> OamSpectrum<T> {
    pub fn total(&self) -> T {
        self.weights.values().copied().sum()
    }

    pub fn get(&self, l: i32) -> T {
        self.weights.get(&l).copied().unwrap_or_else(T::zero)
    }

    /// Copy scaled to unit sum.
    pub fn normalize(&self) -> Result<Self> {
        let t = self.total();
        if !(t > T::zero()) {
            return Err(Error::UndefinedCount);
        }
        Ok(Self {
            weights: self.weights.iter().map(|(l, w)| (*l, *w / t)).collect(),
            context: self.context,
            normalized: true,
        })
    }

    /// Participation ratio over the full two-sided spectrum.
    pub fn mode_count(&self) -> Result<T> {
        mode_count(self.weights.values().copied())
    }

    pub fn l_max(&self) -> i32 {
        self.weights.keys().map(|l| l.abs()).max().unwrap_or(0)
    }
}

/// Circular Fourier coefficients `X_l = (1/n) Σ_d v_d e^{−i l 2πd/n}`.
pub fn circular_dft<T: Real>(values: &[T]) -> Vec<Complex<T>> {
    let n = values.len();
    let inv = count::<T>(n).recip();
    (0..n)
        .map(|l| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (d, &v) in values.iter().enumerate() {
                // Reduce the phase index exactly before converting to an angle.
                let k = (l * d) % n;
                let a = -T::TAU() * count::<T>(k) * inv;
                acc += Complex::from_polar(v, a);
            }
            acc * inv
        })
        .collect()
}

fn charges_for(n: usize, l_max: Option<u32>) -> Result<i32> {
    let limit = ((n - 1) / 2) as i32;
    match l_max {
        None => Ok(limit),
        Some(l) if (l as i32) <= limit => Ok(l as i32),
        Some(l) => Err(param(
            "l_max",
            format!("{n} azimuthal samples resolve |l| <= {limit}, asked for {l}"),
        )),
    }
}

fn spectrum_from_sqrt<T: Real>(
    root: &[T],
    l_max: Option<u32>,
    context: OamContext<T>,
) -> Result<OamSpectrum<T>> {
    let n = root.len();
    let lim = charges_for(n, l_max)?;
    let coeffs = circular_dft(root);
    let re: T = coeffs.iter().map(|c| c.re * c.re).sum::<T>().sqrt();
    let im: T = coeffs.iter().map(|c| c.im * c.im).sum::<T>().sqrt();
    if re > T::zero() && im > re * lit(ASYMMETRY_LIMIT) {
        return Err(Error::Asymmetry {
            ratio: to_f64(im / re),
        });
    }
    let weights = (-lim..=lim)
        .map(|l| {
            let c = coeffs[l.rem_euclid(n as i32) as usize].re;
            (l, c.max(T::zero()))
        })
        .collect();
    Ok(OamSpectrum {
        weights,
        context,
        normalized: false,
    })
}

fn clamped_sqrt<T: Real>(values: &[T]) -> Vec<T> {
    values.iter().map(|v| v.max(T::zero()).sqrt()).collect()
}

fn ring_theta<T: Real>(curve: &CovarianceCurve<T>) -> Option<T> {
    match curve.spec()?.kind {
        SliceKind::Azimuthal { theta0 } => Some(theta0),
        SliceKind::Radial { .. } => None,
    }
}

/// OAM weights `𝓛_l(θ₀)` from the Fourier series of the square root of an
/// azimuthal covariance curve. Charges up to `l_max` are reported (default:
/// every charge the sampling resolves).
pub fn oam_spectrum_at<T: Real>(curve: &CovarianceCurve<T>, l_max: Option<u32>) -> Result<OamSpectrum<T>> {
    if let Some(spec) = curve.spec() {
        if matches!(spec.kind, SliceKind::Radial { .. }) {
            return Err(param("curve", "OAM spectra need an azimuthal slice"));
        }
    }
    spectrum_from_sqrt(
        &clamped_sqrt(curve.periodic()),
        l_max,
        OamContext::Ring(ring_theta(curve)),
    )
}

/// Radially averaged OAM weights `Λ_l` (up to a common scale): Fourier
/// coefficients of `∫ √Cov(Δφ; θ₀) θ₀ dθ₀`, integrated by the trapezoid rule
/// over the ring angles with the origin `(θ₀ = 0, integrand 0)` as the first
/// node.
pub fn oam_spectrum_avg<T: Real>(rings: &[(T, CovarianceCurve<T>)], l_max: Option<u32>) -> Result<OamSpectrum<T>> {
    let first = rings.first().ok_or(Error::InsufficientData { have: 0, need: 1 })?;
    let n = first.1.len();
    if rings.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Shape("all rings need the same azimuthal sampling".into()));
    }
    if rings.windows(2).any(|w| !(w[1].0 > w[0].0)) || !(first.0 > T::zero()) {
        return Err(param("theta0", "ring angles must be positive and strictly increasing"));
    }
    let mut integral = vec![T::zero(); n];
    let (mut prev_t, mut prev_f) = (T::zero(), vec![T::zero(); n]);
    for (t, curve) in rings {
        let f: Vec<T> = clamped_sqrt(curve.periodic()).into_iter().map(|v| v * *t).collect();
        let h = (*t - prev_t) * lit(0.5);
        for ((acc, a), b) in integral.iter_mut().zip(&prev_f).zip(&f) {
            *acc += h * (*a + *b);
        }
        prev_t = *t;
        prev_f = f;
    }
    spectrum_from_sqrt(&integral, l_max, OamContext::RadiallyAveraged)
}

/// Expected ring weights `Σ_p Λ_lp u_lp(θ₀)² / θ₀` for a known output spectrum.
pub fn analytic_oam_at<T: Real>(
    output: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    theta0: T,
) -> Result<OamSpectrum<T>> {
    output.require(SpectrumKind::OutputLambda)?;
    basis.grid().check_theta(theta0)?;
    let t = theta0.max(basis.grid().theta_floor());
    let mut weights = BTreeMap::new();
    for (m, w) in output.iter() {
        let u = basis.value_at(m, theta0)?;
        *weights.entry(m.l).or_insert_with(T::zero) += w * u * u / t;
    }
    Ok(OamSpectrum {
        weights,
        context: OamContext::Ring(Some(theta0)),
        normalized: false,
    })
}

/// Expected radially averaged weights `Λ_l = Σ_p Λ_lp`.
pub fn analytic_oam_avg<T: Real>(output: &SchmidtSpectrum<T>) -> Result<OamSpectrum<T>> {
    output.require(SpectrumKind::OutputLambda)?;
    Ok(OamSpectrum {
        weights: output.l_marginal(),
        context: OamContext::GroundTruth,
        normalized: false,
    })
}
