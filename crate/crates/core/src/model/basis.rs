use std::collections::BTreeMap;

use crate::error::{param, Error, Result};
use crate::model::grid::PolarGrid;
use crate::model::spectrum::{ModeIndex, SchmidtSpectrum};
use crate::num::{count, lit, Real};

/// Minimum number of radial bins per waist accepted by [`build_lg_basis`].
pub const MIN_BINS_PER_WAIST: usize = 8;

/// How radial profiles depend on the azimuthal index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialFamily {
    /// Laguerre-Gauss profile `LG_p^{|l|}` for each `(l, p)`.
    #[default]
    LaguerreGauss,
    /// The `l = 0` Laguerre-Gauss profile of order `p` is reused for every `l`.
    SharedRadial,
}

/// Real radial profiles `u_lp(θ)` sampled at the radial bin centres of a
/// polar grid. Signal and idler share the same profiles.
#[derive(Debug, Clone)]
pub struct ModeBasis<T> {
    grid: PolarGrid<T>,
    waist: T,
    family: RadialFamily,
    profiles: BTreeMap<ModeIndex, Vec<T>>,
}

impl<T: Real> ModeBasis<T> {
    pub fn grid(&self) -> &PolarGrid<T> {
        &self.grid
    }

    pub fn waist(&self) -> T {
        self.waist
    }

    pub fn family(&self) -> RadialFamily {
        self.family
    }

    pub fn profile(&self, mode: ModeIndex) -> Option<&[T]> {
        self.profiles.get(&mode).map(Vec::as_slice)
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.profiles.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Profile value at an arbitrary radial angle, linearly interpolated
    /// between bin centres.
    pub fn value_at(&self, mode: ModeIndex, theta: T) -> Result<T> {
        self.grid.check_theta(theta)?;
        let prof = self.profile(mode).ok_or(Error::MissingMode {
            l: mode.l,
            p: mode.p,
        })?;
        let (i, f) = self.grid.interp_index(theta);
        Ok(prof[i] * (T::one() - f) + prof[i + 1] * f)
    }

    /// Discrete inner product `Σ u_a u_b Δθ` on the grid.
    pub fn inner_product(&self, a: ModeIndex, b: ModeIndex) -> Option<T> {
        let (ua, ub) = (self.profile(a)?, self.profile(b)?);
        let dt = self.grid.d_theta();
        Some(ua.iter().zip(ub).map(|(x, y)| *x * *y).sum::<T>() * dt)
    }

    /// Checks that every mode with positive weight has a profile.
    pub fn check_covers(&self, spectrum: &SchmidtSpectrum<T>) -> Result<()> {
        for (m, w) in spectrum.iter() {
            if w > T::zero() && !self.profiles.contains_key(&m) {
                return Err(Error::MissingMode { l: m.l, p: m.p });
            }
        }
        Ok(())
    }
}

/// Generalized Laguerre polynomial `L_n^α(x)` by three-term recurrence.
pub fn laguerre<T: Real>(n: u32, alpha: T, x: T) -> T {
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = T::one() + alpha - x;
    for k in 1..n {
        let k = count::<T>(k as usize);
        let next = ((k + k + T::one() + alpha - x) * cur - (k + alpha) * prev) / (k + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Continuum Laguerre-Gauss radial function multiplied by `√θ`, so the
/// result is square-integrable in plain `dθ`.
fn lg_sample<T: Real>(abs_l: u32, p: u32, waist: T, theta: T) -> T {
    if theta <= T::zero() {
        return T::zero();
    }
    let s = theta / waist;
    let x = (s * s) * lit(2.0);
    // log of the power-law and Gaussian factors plus the standard
    // normalization sqrt(p!/(p+|l|)!), kept in log space for large |l|.
    let ln_norm = 0.5 * (ln_factorial(p) - ln_factorial(p + abs_l));
    let ln_env = count::<T>(abs_l as usize) * (s * T::SQRT_2()).ln() - s * s + lit(ln_norm);
    theta.sqrt() * ln_env.exp() * laguerre(p, count(abs_l as usize), x)
}

/// Samples Laguerre-Gauss radial profiles of angular waist `waist` on the
/// radial bins of `grid` and re-orthonormalizes them (Gram-Schmidt within
/// each `l`) in the discrete measure `Δθ`.
pub fn build_lg_basis<T: Real>(
    grid: &PolarGrid<T>,
    waist: T,
    l_max: u32,
    p_max: u32,
) -> Result<ModeBasis<T>> {
    build_basis(grid, waist, l_max, p_max, RadialFamily::LaguerreGauss)
}

pub fn build_basis<T: Real>(
    grid: &PolarGrid<T>,
    waist: T,
    l_max: u32,
    p_max: u32,
    family: RadialFamily,
) -> Result<ModeBasis<T>> {
    if !(waist > T::zero()) || !waist.is_finite() {
        return Err(param("waist", format!("must be positive, got {waist}")));
    }
    let bins = waist / grid.d_theta();
    if bins < count(MIN_BINS_PER_WAIST) {
        return Err(Error::Resolution {
            bins_per_waist: crate::num::to_f64(bins),
            required: MIN_BINS_PER_WAIST,
        });
    }
    if (p_max as usize) >= grid.n_theta {
        return Err(param("p_max", "more radial modes than radial bins"));
    }
    let thetas = grid.thetas();
    let dt = grid.d_theta();

    let mut by_abs_l: BTreeMap<u32, Vec<Vec<T>>> = BTreeMap::new();
    let orders: Vec<u32> = match family {
        RadialFamily::LaguerreGauss => (0..=l_max).collect(),
        RadialFamily::SharedRadial => vec![0],
    };
    for abs_l in orders {
        let mut set: Vec<Vec<T>> = Vec::with_capacity(p_max as usize + 1);
        for p in 0..=p_max {
            let mut v: Vec<T> = thetas.iter().map(|&t| lg_sample(abs_l, p, waist, t)).collect();
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for u in &set {
                    let proj: T = v.iter().zip(u).map(|(a, b)| *a * *b).sum::<T>() * dt;
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * *b);
                }
            }
            let norm = (v.iter().map(|a| *a * *a).sum::<T>() * dt).sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(param(
                    "p_max",
                    format!("radial mode (|l|={abs_l}, p={p}) vanishes on the grid"),
                ));
            }
            v.iter_mut().for_each(|a| *a /= norm);
            // Fix the sign: positive near the axis, which for LG means a
            // positive first lobe.
            if let Some(first) = v.iter().find(|a| a.abs() > T::epsilon()) {
                if *first < T::zero() {
                    v.iter_mut().for_each(|a| *a = -*a);
                }
            }
            set.push(v);
        }
        by_abs_l.insert(abs_l, set);
    }

    let mut profiles = BTreeMap::new();
    let l_max = l_max as i32;
    for l in -l_max..=l_max {
        let key = match family {
            RadialFamily::LaguerreGauss => l.unsigned_abs(),
            RadialFamily::SharedRadial => 0,
        };
        for (p, prof) in by_abs_l[&key].iter().enumerate() {
            profiles.insert(ModeIndex::new(l, p as u32), prof.clone());
        }
    }
    Ok(ModeBasis {
        grid: grid.clone(),
        waist,
        family,
        profiles,
    })
}
