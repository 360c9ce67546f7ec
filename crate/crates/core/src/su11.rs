//! Gain algebra of two coherently pumped parametric amplifiers in sequence.
//!
//! Every Schmidt mode `(l, p)` evolves independently: the output signal
//! operator is `w1 · A_in + w2 · B_in†` with effective Bogoliubov weights
//! that depend on the gains, the interferometer phase and `√λ_lp`.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{param, Error, Result};
use crate::model::{ModeBasis, ModeIndex, SchmidtSpectrum, SpectrumKind};
use crate::num::{count, lit, to_f64, wrap_two_pi, Real};

/// Ratio by which the left side of the high-gain validity condition must
/// exceed the right side.
pub const DEFAULT_VALIDITY_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig<T> {
    g1: T,
    g2: T,
    phi: T,
}

impl<T: Real> InterferometerConfig<T> {
    /// `phi` is reduced to `[0, 2π)`.
    pub fn new(g1: T, g2: T, phi: T) -> Result<Self> {
        if !(g1 >= T::zero()) || !g1.is_finite() {
            return Err(param("g1", format!("gain must be nonnegative, got {g1}")));
        }
        if !(g2 >= T::zero()) || !g2.is_finite() {
            return Err(param("g2", format!("gain must be nonnegative, got {g2}")));
        }
        if !phi.is_finite() {
            return Err(param("phi", "phase must be finite"));
        }
        Ok(Self {
            g1,
            g2,
            phi: wrap_two_pi(phi),
        })
    }

    pub fn g1(&self) -> T {
        self.g1
    }

    pub fn g2(&self) -> T {
        self.g2
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn with_phi(&self, phi: T) -> Result<Self> {
        Self::new(self.g1, self.g2, phi)
    }

    /// Same amplifiers in the opposite order.
    pub fn swapped(&self) -> Self {
        Self {
            g1: self.g2,
            g2: self.g1,
            phi: self.phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWeights<T> {
    pub w1: Complex<T>,
    pub w2: Complex<T>,
}

impl<T: Real> ModeWeights<T> {
    /// `|w1|² − |w2|²`, equal to one for a symplectic evolution.
    pub fn symplectic_defect(&self) -> T {
        self.w1.norm_sqr() - self.w2.norm_sqr() - T::one()
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveWeights<T> {
    pub weights: BTreeMap<ModeIndex, ModeWeights<T>>,
}

fn check_argument<T: Real>(arg: T) -> Result<()> {
    let limit = T::hyperbolic_limit();
    if arg > limit {
        Err(Error::Range {
            argument: to_f64(arg),
            limit: to_f64(limit),
        })
    } else {
        Ok(())
    }
}

/// Effective weights of one mode with Schmidt eigenvalue `lambda`.
pub fn mode_weights<T: Real>(cfg: &InterferometerConfig<T>, lambda: T) -> Result<ModeWeights<T>> {
    if !(lambda >= T::zero()) {
        return Err(param("lambda", format!("must be nonnegative, got {lambda}")));
    }
    let s = lambda.sqrt();
    let (a, b) = (s * cfg.g1, s * cfg.g2);
    check_argument(a)?;
    check_argument(b)?;
    let (sa, ca) = (a.sinh(), a.cosh());
    let (sb, cb) = (b.sinh(), b.cosh());
    let e = Complex::from_polar(T::one(), cfg.phi);
    Ok(ModeWeights {
        w1: e * (sa * sb) + ca * cb,
        w2: e * (ca * sb) + sa * cb,
    })
}

pub fn effective_weights<T: Real>(
    cfg: &InterferometerConfig<T>,
    spectrum: &SchmidtSpectrum<T>,
) -> Result<EffectiveWeights<T>> {
    spectrum.require(SpectrumKind::InputLambda)?;
    let weights = spectrum
        .iter()
        .map(|(m, lambda)| mode_weights(cfg, lambda).map(|w| (m, w)))
        .collect::<Result<_>>()?;
    Ok(EffectiveWeights { weights })
}

/// Output Schmidt eigenvalues Λ_lp = |w2|², the mean photon number per mode.
pub fn output_spectrum<T: Real>(
    cfg: &InterferometerConfig<T>,
    spectrum: &SchmidtSpectrum<T>,
) -> Result<SchmidtSpectrum<T>> {
    let eff = effective_weights(cfg, spectrum)?;
    let w = eff
        .weights
        .into_iter()
        .map(|(m, w)| (m, w.w2.norm_sqr()))
        .collect();
    SchmidtSpectrum::new(w, SpectrumKind::OutputLambda)
}

/// `|1 + e^{iΦ}|`, written as `2|cos(Φ/2)|`.
fn fringe_factor<T: Real>(phi: T) -> T {
    (phi * lit(0.5)).cos().abs() * lit(2.0)
}

/// High-gain form Λ_lp ≈ ¼ sinh²(√λ (G1 + G2)) |1 + e^{iΦ}|².
pub fn high_gain_approx<T: Real>(
    cfg: &InterferometerConfig<T>,
    spectrum: &SchmidtSpectrum<T>,
) -> Result<SchmidtSpectrum<T>> {
    spectrum.require(SpectrumKind::InputLambda)?;
    let f = fringe_factor(cfg.phi);
    let fringe = f * f;
    let quarter = lit::<T>(0.25);
    let w = spectrum
        .iter()
        .map(|(m, lambda)| {
            let arg = lambda.sqrt() * (cfg.g1 + cfg.g2);
            check_argument(arg)?;
            Ok((m, quarter * arg.sinh().powi(2) * fringe))
        })
        .collect::<Result<_>>()?;
    SchmidtSpectrum::new(w, SpectrumKind::OutputLambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity<T> {
    pub lhs: T,
    pub rhs: T,
    pub valid: bool,
}

impl<T: Real> Validity<T> {
    pub fn ratio(&self) -> T {
        self.lhs / self.rhs
    }
}

/// Both sides of the high-gain validity condition
/// `sinh(√λ(G1+G2))|1+e^{iΦ}| ≫ sinh(√λ|G1−G2|)`; `≫` means at least
/// `ratio_threshold` times larger.
pub fn approx_validity<T: Real>(
    cfg: &InterferometerConfig<T>,
    lambda: T,
    ratio_threshold: T,
) -> Result<Validity<T>> {
    if !(lambda > T::zero() && lambda <= T::one()) {
        return Err(param("lambda", format!("must lie in (0, 1], got {lambda}")));
    }
    let s = lambda.sqrt();
    let sum = s * (cfg.g1 + cfg.g2);
    check_argument(sum)?;
    let lhs = sum.sinh() * fringe_factor(cfg.phi);
    let rhs = (s * (cfg.g1 - cfg.g2).abs()).sinh();
    Ok(Validity {
        lhs,
        rhs,
        valid: lhs >= ratio_threshold * rhs,
    })
}

/// Mean signal photon number in the plane-wave mode at radial angle `theta`:
/// Σ |w2|² |u_lp(θ)|² / θ.
pub fn mean_photons_vs_angle<T: Real>(
    cfg: &InterferometerConfig<T>,
    spectrum: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    theta: T,
) -> Result<T> {
    let out = output_spectrum(cfg, spectrum)?;
    mean_intensity(&out, basis, theta)
}

/// Σ Λ_lp |u_lp(θ)|² / θ for an output spectrum.
pub fn mean_intensity<T: Real>(
    output: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    theta: T,
) -> Result<T> {
    output.require(SpectrumKind::OutputLambda)?;
    basis.grid().check_theta(theta)?;
    let t = theta.max(basis.grid().theta_floor());
    let mut acc = T::zero();
    for (m, w) in output.iter() {
        if w == T::zero() {
            continue;
        }
        let u = basis.value_at(m, theta)?;
        acc += w * u * u / t;
    }
    Ok(acc)
}

/// Mean total number of signal photons Σ |w2|².
pub fn total_photons<T: Real>(
    cfg: &InterferometerConfig<T>,
    spectrum: &SchmidtSpectrum<T>,
) -> Result<T> {
    Ok(output_spectrum(cfg, spectrum)?.total())
}

/// `n` phases uniformly covering `[0, 2π)`.
pub fn uniform_phases<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|k| T::TAU() * count::<T>(k) / count::<T>(n))
        .collect()
}

/// Total photon number at each interferometer phase.
pub fn phase_sweep<T: Real>(
    g1: T,
    g2: T,
    phases: &[T],
    spectrum: &SchmidtSpectrum<T>,
) -> Result<Vec<(T, T)>> {
    if phases.is_empty() {
        return Err(param("phases", "phase grid is empty"));
    }
    phases
        .iter()
        .map(|&phi| {
            let cfg = InterferometerConfig::new(g1, g2, phi)?;
            Ok((cfg.phi, total_photons(&cfg, spectrum)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::geometric_spectrum;
    use std::f64::consts::PI;

    fn unit() -> SchmidtSpectrum<f64> {
        let mut w = BTreeMap::new();
        w.insert(ModeIndex::new(0, 0), 1.0);
        SchmidtSpectrum::new(w, SpectrumKind::InputLambda).unwrap()
    }

    #[test]
    fn zero_gain_is_identity() {
        let s = geometric_spectrum::<f64>(0.6, 3, 2).unwrap();
        for phi in [0.0, 1.0, PI, 5.0] {
            let cfg = InterferometerConfig::new(0.0, 0.0, phi).unwrap();
            let eff = effective_weights(&cfg, &s).unwrap();
            for w in eff.weights.values() {
                assert_eq!(w.w1, Complex::new(1.0, 0.0));
                assert_eq!(w.w2.norm(), 0.0);
            }
            assert!(output_spectrum(&cfg, &s).unwrap().iter().all(|(_, v)| v == 0.0));
        }
    }

    #[test]
    fn in_phase_gains_add() {
        let cfg = InterferometerConfig::new(2.1_f64, 3.3, 0.0).unwrap();
        let w = mode_weights(&cfg, 1.0).unwrap();
        // sinh(5.4), evaluated independently at 30 digits.
        let want = 110.700949811622276509;
        assert!((w.w2.re - want).abs() < 1e-12 * want);
        assert!(w.w2.im.abs() < 1e-12);
    }

    #[test]
    fn opposite_phase_gains_subtract() {
        let (a, b) = (1.7, 0.4);
        let cfg = InterferometerConfig::new(a, b, PI).unwrap();
        let w = mode_weights(&cfg, 1.0).unwrap();
        assert!((w.w2.re - (a - b).sinh()).abs() < 1e-12);
        assert!(w.w2.im.abs() < 1e-12);
    }

    #[test]
    fn single_amplifier_output() {
        for phi in [0.0, 1.3, 4.0] {
            let cfg = InterferometerConfig::new(2.0, 0.0, phi).unwrap();
            let out = output_spectrum(&cfg, &unit()).unwrap();
            let want = 2.0_f64.sinh().powi(2);
            assert!((out.get(0, 0) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn operating_point_matches_scalar_oracle() {
        // Per-mode Λ for geometric_spectrum::<f64>(0.5, 2, 1) at G1=2.1, G2=3.3,
        // Φ=3.82, evaluated independently with 30-digit arithmetic.
        let frozen = [
            ((0, 0), 12.87861722487298),
            ((1, 0), 2.2472275020644797),
            ((-1, 0), 2.2472275020644797),
            ((2, 0), 0.63958064928876284),
            ((0, 1), 0.63958064928876284),
            ((1, 1), 0.24005207940219955),
            ((2, 1), 0.10399613897023914),
        ];
        let s = geometric_spectrum::<f64>(0.5, 2, 1).unwrap();
        assert_eq!(s.len(), 10);
        let cfg = InterferometerConfig::new(2.1, 3.3, 3.82).unwrap();
        let out = output_spectrum(&cfg, &s).unwrap();
        for ((l, p), want) in frozen {
            let got = out.get(l, p);
            assert!((got - want).abs() < 1e-12 * want, "({l},{p}): {got} vs {want}");
        }
    }

    #[test]
    fn high_gain_form_is_exact_for_equal_gains_in_phase() {
        let cfg = InterferometerConfig::new(2.0, 2.0, 0.0).unwrap();
        let exact = output_spectrum(&cfg, &unit()).unwrap().get(0, 0);
        let approx = high_gain_approx(&cfg, &unit()).unwrap().get(0, 0);
        assert!((exact - 4.0_f64.sinh().powi(2)).abs() < 1e-9 * exact);
        assert!((exact - approx).abs() < 1e-12 * exact);
    }

    #[test]
    fn high_gain_form_vanishes_on_dark_fringe() {
        let cfg = InterferometerConfig::new(2.1, 3.3, PI).unwrap();
        let s = geometric_spectrum::<f64>(0.6, 4, 3).unwrap();
        let approx = high_gain_approx(&cfg, &s).unwrap();
        assert!(approx.iter().all(|(_, v)| v < 1e-20));
    }

    #[test]
    fn high_gain_relative_error_at_operating_point() {
        // 30-digit oracle: exact 1358.7858636211482, approx 1356.7596476158417.
        let cfg = InterferometerConfig::new(2.1, 3.3, 3.82).unwrap();
        let exact = output_spectrum(&cfg, &unit()).unwrap().get(0, 0);
        let approx = high_gain_approx(&cfg, &unit()).unwrap().get(0, 0);
        assert!((exact - 1358.7858636211482).abs() < 1e-9);
        assert!((approx - 1356.7596476158417).abs() < 1e-9);
        let rel = (approx - exact).abs() / exact;
        assert!((rel - 0.0014911959710168553).abs() < 1e-12);
    }

    #[test]
    fn validity_condition() {
        let cfg = InterferometerConfig::new(2.1, 3.3, PI).unwrap();
        let v = approx_validity(&cfg, 1.0, 10.0).unwrap();
        assert!(v.lhs.abs() < 1e-12 && !v.valid);

        for phi in [0.0, 1.0, 3.0, 3.5, 6.0] {
            let cfg = InterferometerConfig::new(2.5, 2.5, phi).unwrap();
            let v = approx_validity(&cfg, 0.3, 10.0).unwrap();
            assert_eq!(v.rhs, 0.0);
            assert!(v.valid);
        }

        let cfg = InterferometerConfig::new(2.1_f64, 3.3, 3.82).unwrap();
        let v = approx_validity(&cfg, 1.0, 10.0).unwrap();
        assert!((v.lhs - 73.668436867245708).abs() < 1e-9);
        assert!((v.rhs - 1.5094613554121727).abs() < 1e-12);
        assert!((v.ratio() - 48.804453723248745).abs() < 1e-9);
        assert!(v.valid);
        assert!(approx_validity(&cfg, 0.0, 10.0).is_err());
    }

    #[test]
    fn overflow_guard() {
        let cfg = InterferometerConfig::new(400.0, 400.0, 0.0).unwrap();
        assert!(matches!(high_gain_approx(&cfg, &unit()), Err(Error::Range { .. })));
        let cfg = InterferometerConfig::new(701.0, 0.0, 0.0).unwrap();
        assert!(matches!(mode_weights(&cfg, 1.0), Err(Error::Range { .. })));
    }

    #[test]
    fn phase_sweep_oracle() {
        // |w2|² at Φ = 2πk/8 for λ = 1, G1 = 2.1, G2 = 3.3 (30-digit oracle).
        let frozen = [
            12254.700289195305,
            10460.374657277949,
            6128.4893813893941,
            1796.6041055008389,
            2.2784735834827535,
            1796.6041055008389,
            6128.4893813893941,
            10460.374657277949,
        ];
        let sweep = phase_sweep(2.1, 3.3, &uniform_phases(8), &unit()).unwrap();
        for ((_, got), want) in sweep.iter().zip(frozen) {
            assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn sweep_extrema_sit_at_bright_and_dark_fringes() {
        let s = geometric_spectrum::<f64>(0.6, 6, 4).unwrap();
        let sweep = phase_sweep(2.1, 3.3, &uniform_phases(64), &s).unwrap();
        let (imin, _) = sweep
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap();
        let (imax, _) = sweep
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap();
        assert_eq!(imin, 32);
        assert_eq!(imax, 0);
        assert!(phase_sweep(2.1, 3.3, &[], &s).is_err());
    }

    #[test]
    fn mean_photons_single_mode_profile() {
        use crate::model::{build_lg_basis, PolarGrid};
        let g = PolarGrid::new(0.0, 20e-3, 200, 32).unwrap();
        let b = build_lg_basis(&g, 4e-3, 4, 3).unwrap();
        let cfg0 = InterferometerConfig::new(0.0, 0.0, 1.0).unwrap();
        let cfg = InterferometerConfig::new(1.0, 0.5, 0.0).unwrap();
        for theta in [1e-3, 3e-3, 7e-3] {
            assert_eq!(mean_photons_vs_angle(&cfg0, &unit(), &b, theta).unwrap(), 0.0);
            let u = b.value_at(ModeIndex::new(0, 0), theta).unwrap();
            let want = 1.5_f64.sinh().powi(2) * u * u / theta;
            let got = mean_photons_vs_angle(&cfg, &unit(), &b, theta).unwrap();
            assert!((got - want).abs() < 1e-12 * want);
        }
        assert!(mean_photons_vs_angle(&cfg, &unit(), &b, 25e-3).is_err());
    }

    #[test]
    fn mean_photons_matches_term_by_term_sum() {
        use crate::model::{build_lg_basis, PolarGrid};
        let g = PolarGrid::new(0.0, 20e-3, 200, 32).unwrap();
        let b = build_lg_basis(&g, 4e-3, 2, 1).unwrap();
        let s = geometric_spectrum::<f64>(0.5, 2, 1).unwrap();
        let cfg = InterferometerConfig::new(2.1, 3.3, 3.82).unwrap();
        for i in [10, 25, 40, 61, 90] {
            let theta = g.theta(i);
            let mut want = 0.0;
            for (m, lambda) in s.iter() {
                let sq = lambda.sqrt();
                let e = Complex::from_polar(1.0, 3.82);
                let w2 = e * ((sq * 2.1).cosh() * (sq * 3.3).sinh())
                    + (sq * 2.1).sinh() * (sq * 3.3).cosh();
                let u = b.profile(m).unwrap()[i];
                want += w2.norm_sqr() * u * u / theta;
            }
            let got = mean_photons_vs_angle(&cfg, &s, &b, theta).unwrap();
            assert!((got - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn gain_order_does_not_change_photon_number() {
        let s = geometric_spectrum::<f64>(0.7, 5, 3).unwrap();
        for phi in [0.0, 0.9, 2.5, PI, 4.4] {
            let cfg = InterferometerConfig::new(1.4, 2.9, phi).unwrap();
            let a = output_spectrum(&cfg, &s).unwrap();
            let b = output_spectrum(&cfg.swapped(), &s).unwrap();
            for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
            }
        }
    }

    #[test]
    fn normalized_high_gain_shape_ignores_phase() {
        let s = geometric_spectrum::<f64>(0.6, 4, 2).unwrap();
        let shape = |phi: f64| {
            let cfg = InterferometerConfig::new(2.1, 3.3, phi).unwrap();
            let out = high_gain_approx(&cfg, &s).unwrap();
            let t = out.total();
            out.iter().map(|(_, v)| v / t).collect::<Vec<_>>()
        };
        let base = shape(0.0);
        for phi in [0.7, 2.0, 3.82, 5.5] {
            for (a, b) in base.iter().zip(shape(phi)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_precision_weights() {
        let cfg = InterferometerConfig::new(2.1_f32, 3.3, 3.82).unwrap();
        let w = mode_weights(&cfg, 1.0).unwrap();
        assert!((w.w2.norm_sqr() - 1358.7859).abs() < 0.1);
        let cfg = InterferometerConfig::new(89.0_f32, 0.0, 0.0).unwrap();
        assert!(matches!(mode_weights(&cfg, 1.0), Err(Error::Range { .. })));
    }

    proptest::proptest! {
        #[test]
        fn symplectic(g1 in 0.0..6.0f64, g2 in 0.0..6.0f64, phi in -10.0..10.0f64, lambda in 0.0..1.0f64) {
            let cfg = InterferometerConfig::new(g1, g2, phi).unwrap();
            let w = mode_weights(&cfg, lambda).unwrap();
            let scale = w.w1.norm_sqr();
            proptest::prop_assert!(w.symplectic_defect().abs() <= 1e-12 * scale.max(1.0));
            proptest::prop_assert!(cfg.phi() >= 0.0 && cfg.phi() < 2.0 * PI);
        }
    }
}
