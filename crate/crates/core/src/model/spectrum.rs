use std::collections::BTreeMap;
use std::fmt;

use crate::error::{param, Error, Result};
use crate::num::{unit_sum_tolerance, Real};

/// Azimuthal (OAM charge) and radial indices of a Schmidt mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub l: i32,
    pub p: u32,
}

impl ModeIndex {
    pub const fn new(l: i32, p: u32) -> Self {
        Self { l, p }
    }

    /// Injective key used to address per-mode random draws.
    pub fn key(self) -> u64 {
        let zigzag = ((self.l << 1) ^ (self.l >> 31)) as u32 as u64;
        (zigzag << 24) | u64::from(self.p & 0x00ff_ffff)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(l={}, p={})", self.l, self.p)
    }
}

/// Whether a spectrum holds normalized two-photon Schmidt eigenvalues λ or
/// per-mode photon numbers Λ at the interferometer output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    InputLambda,
    OutputLambda,
}

impl SpectrumKind {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::InputLambda => "input-lambda",
            SpectrumKind::OutputLambda => "output-Lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum<T> {
    weights: BTreeMap<ModeIndex, T>,
    kind: SpectrumKind,
}

impl<T: Real> SchmidtSpectrum<T> {
    pub fn new(weights: BTreeMap<ModeIndex, T>, kind: SpectrumKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(param("weights", "spectrum has no modes"));
        }
        if let Some((m, w)) = weights.iter().find(|(_, w)| !(**w >= T::zero()) || !w.is_finite()) {
            return Err(param("weights", format!("mode {m} has invalid weight {w}")));
        }
        if kind == SpectrumKind::InputLambda {
            let total: T = weights.values().copied().sum();
            if (total - T::one()).abs() > unit_sum_tolerance::<T>() {
                return Err(param(
                    "weights",
                    format!("input eigenvalues must sum to 1, got {total}"),
                ));
            }
        }
        Ok(Self { weights, kind })
    }

    /// Builds an input spectrum by normalizing arbitrary nonnegative weights.
    pub fn normalized(weights: BTreeMap<ModeIndex, T>) -> Result<Self> {
        let total: T = weights.values().copied().sum();
        if !(total > T::zero()) {
            return Err(param("weights", "total weight must be positive"));
        }
        let w = weights.into_iter().map(|(k, v)| (k, v / total)).collect();
        Self::new(w, SpectrumKind::InputLambda)
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub(crate) fn require(&self, kind: SpectrumKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::SpectrumKind {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }

    pub fn weights(&self) -> &BTreeMap<ModeIndex, T> {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, T)> + '_ {
        self.weights.iter().map(|(k, v)| (*k, *v))
    }

    pub fn get(&self, l: i32, p: u32) -> T {
        self.weights
            .get(&ModeIndex::new(l, p))
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> T {
        self.weights.values().copied().sum()
    }

    pub fn l_max(&self) -> i32 {
        self.weights.keys().map(|m| m.l.abs()).max().unwrap_or(0)
    }

    pub fn p_max(&self) -> u32 {
        self.weights.keys().map(|m| m.p).max().unwrap_or(0)
    }

    /// Λ_l = Σ_p Λ_lp.
    pub fn l_marginal(&self) -> BTreeMap<i32, T> {
        let mut out = BTreeMap::new();
        for (m, w) in self.iter() {
            *out.entry(m.l).or_insert_with(T::zero) += w;
        }
        out
    }

    /// Λ_p = Σ_l Λ_lp.
    pub fn p_marginal(&self) -> BTreeMap<u32, T> {
        let mut out = BTreeMap::new();
        for (m, w) in self.iter() {
            *out.entry(m.p).or_insert_with(T::zero) += w;
        }
        out
    }

    /// Participation ratio of the full (l, p) distribution.
    pub fn schmidt_number(&self) -> T {
        let total = self.total();
        let s: T = self.weights.values().map(|w| (*w / total).powi(2)).sum();
        T::one() / s
    }
}

/// Geometric double-index law λ_lp ∝ mu^(2p + |l|) over `|l| ≤ l_max`,
/// `p ≤ p_max`, normalized to unit sum.
pub fn geometric_spectrum<T: Real>(mu: T, l_max: u32, p_max: u32) -> Result<SchmidtSpectrum<T>> {
    if !(mu > T::zero() && mu < T::one()) {
        return Err(param("mu", format!("must lie in (0, 1), got {mu}")));
    }
    let l_max = l_max as i32;
    let mut w = BTreeMap::new();
    for l in -l_max..=l_max {
        for p in 0..=p_max {
            let n = 2 * p as i32 + l.abs();
            w.insert(ModeIndex::new(l, p), mu.powi(n));
        }
    }
    SchmidtSpectrum::normalized(w)
}

/// Smallest `(l_max, p_max)` for which the discarded part of the infinite
/// geometric law is below `tail` of the total weight.
pub fn geometric_truncation<T: Real>(mu: T, tail: T) -> Result<(u32, u32)> {
    if !(mu > T::zero() && mu < T::one()) {
        return Err(param("mu", format!("must lie in (0, 1), got {mu}")));
    }
    if !(tail > T::zero() && tail < T::one()) {
        return Err(param("tail", "must lie in (0, 1)"));
    }
    let half = tail / (T::one() + T::one());
    // l tail: 2 mu^(L+1) / (1 + mu); p tail: mu^(2(P+1)).
    let mut l_max = 0u32;
    while (T::one() + T::one()) * mu.powi(l_max as i32 + 1) / (T::one() + mu) > half {
        l_max += 1;
    }
    let mut p_max = 0u32;
    while mu.powi(2 * (p_max as i32 + 1)) > half {
        p_max += 1;
    }
    Ok((l_max, p_max))
}

/// Separable weights λ_lp ∝ a_l · b_p, normalized.
pub fn product_spectrum<T: Real>(
    l_weights: &BTreeMap<i32, T>,
    p_weights: &BTreeMap<u32, T>,
) -> Result<SchmidtSpectrum<T>> {
    let mut w = BTreeMap::new();
    for (&l, &a) in l_weights {
        for (&p, &b) in p_weights {
            w.insert(ModeIndex::new(l, p), a * b);
        }
    }
    SchmidtSpectrum::normalized(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_mu_keeps_only_the_ground_mode() {
        let s = geometric_spectrum(1e-12_f64, 5, 5).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-11);
        for (m, w) in s.iter() {
            if m != ModeIndex::new(0, 0) {
                assert!(w < 1e-11, "{m}: {w}");
            }
        }
    }

    #[test]
    fn two_mode_geometric_law() {
        let s = geometric_spectrum(0.5_f64, 0, 1).unwrap();
        assert!((s.get(0, 0) - 0.8).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn schmidt_number_matches_brute_force_sum() {
        // Oracle: independent double loop over the truncated series.
        let mu = 0.5_f64;
        let mut raw = Vec::new();
        for l in -20_i32..=20 {
            for p in 0..=20_i32 {
                raw.push(mu.powi(2 * p + l.abs()));
            }
        }
        let z: f64 = raw.iter().sum();
        let k = 1.0 / raw.iter().map(|w| (w / z).powi(2)).sum::<f64>();
        let s = geometric_spectrum(mu, 20, 20).unwrap();
        assert!((s.schmidt_number() - k).abs() < 1e-12 * k);
        // Frozen from an independent Python evaluation of the same sum.
        assert!((k - 8.999988555911058).abs() < 1e-9, "K = {k}");
    }

    #[test]
    fn rejects_mu_outside_unit_interval() {
        assert!(geometric_spectrum(0.0_f64, 2, 2).is_err());
        assert!(geometric_spectrum(1.0_f64, 2, 2).is_err());
        assert!(geometric_spectrum(-0.3_f64, 2, 2).is_err());
    }

    #[test]
    fn input_spectrum_must_sum_to_one() {
        let mut w = BTreeMap::new();
        w.insert(ModeIndex::new(0, 0), 0.5_f64);
        assert!(SchmidtSpectrum::new(w.clone(), SpectrumKind::InputLambda).is_err());
        assert!(SchmidtSpectrum::new(w, SpectrumKind::OutputLambda).is_ok());
    }

    #[test]
    fn truncation_discards_less_than_requested_tail() {
        let mu = 0.68_f64;
        let (l_max, p_max) = geometric_truncation(mu, 1e-6).unwrap();
        let kept: f64 = {
            let mut s = 0.0;
            for l in -(l_max as i32)..=l_max as i32 {
                for p in 0..=p_max as i32 {
                    s += mu.powi(2 * p + l.abs());
                }
            }
            s
        };
        let full = (1.0 + mu) / (1.0 - mu) / (1.0 - mu * mu);
        assert!(1.0 - kept / full < 1e-6);
        assert!(l_max > 10 && p_max > 5);
    }

    #[test]
    fn mode_keys_are_distinct() {
        let mut keys = std::collections::HashSet::new();
        for l in -50..=50 {
            for p in 0..50 {
                assert!(keys.insert(ModeIndex::new(l, p).key()));
            }
        }
    }

    #[test]
    fn f32_spectrum_is_normalized() {
        let s = geometric_spectrum(0.6_f32, 6, 4).unwrap();
        assert!((s.total() - 1.0).abs() < 1e-5);
    }
}
