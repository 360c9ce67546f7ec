use num_complex::Complex;

use crate::error::Result;
use crate::model::basis::ModeBasis;
use crate::model::spectrum::{SchmidtSpectrum, SpectrumKind};
use crate::num::Real;

/// Two-photon amplitude F(q_s, q_i) from its Schmidt decomposition.
///
/// `signal` and `idler` are `(θ, φ)` pairs in rad.
pub fn evaluate_tpa<T: Real>(
    spectrum: &SchmidtSpectrum<T>,
    basis: &ModeBasis<T>,
    signal: (T, T),
    idler: (T, T),
) -> Result<Complex<T>> {
    spectrum.require(SpectrumKind::InputLambda)?;
    basis.check_covers(spectrum)?;
    let grid = basis.grid();
    grid.check_theta(signal.0)?;
    grid.check_theta(idler.0)?;
    let floor = grid.theta_floor();
    let rs = signal.0.max(floor).sqrt();
    let ri = idler.0.max(floor).sqrt();
    let mut acc = Complex::new(T::zero(), T::zero());
    for (m, lambda) in spectrum.iter() {
        if lambda == T::zero() {
            continue;
        }
        let us = basis.value_at(m, signal.0)? / rs;
        let ui = basis.value_at(m, idler.0)? / ri;
        let l = crate::num::lit::<T>(f64::from(m.l));
        let phase = Complex::from_polar(T::one(), l * (signal.1 - idler.1));
        acc = acc + phase * (lambda.sqrt() * us * ui);
    }
    Ok(acc)
}
