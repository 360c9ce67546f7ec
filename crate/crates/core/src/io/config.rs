//! TOML run configuration.
//!
//! Every block and key is optional and falls back to the defaults below;
//! unknown keys are rejected. Angles are in radians.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    LaguerreGauss,
    SharedRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beam {
    #[default]
    Signal,
    Twin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceInterpolation {
    #[default]
    Bicubic,
    Bilinear,
    PixelBinning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Svg,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, Self::Svg | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Ratio of the geometric eigenvalue law.
    pub mu: f64,
    /// Angular waist of the Laguerre-Gauss basis.
    pub waist: f64,
    /// Truncation; derived from `tail` when absent.
    pub l_max: Option<u32>,
    pub p_max: Option<u32>,
    /// Weight allowed outside the automatic truncation.
    pub tail: f64,
    pub family: Family,
    pub width: usize,
    pub height: usize,
    /// Angle subtended by one pixel.
    pub pitch: f64,
    /// Radial samples of the mode basis.
    pub basis_bins: usize,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mu: 0.68,
            waist: 3.5e-3,
            l_max: None,
            p_max: None,
            tail: 1e-6,
            family: Family::LaguerreGauss,
            width: 64,
            height: 64,
            pitch: 5e-4,
            basis_bins: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferometerBlock {
    pub g1: f64,
    pub g2: f64,
    pub phi: f64,
    /// How much larger the left side of the high-gain condition must be.
    pub validity_ratio: f64,
}

impl Default for InterferometerBlock {
    fn default() -> Self {
        Self {
            g1: 2.1,
            g2: 3.3,
            phi: 3.82,
            validity_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub enabled: bool,
    pub electronic_sigma: f64,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub n_frames: usize,
    pub seed: u64,
    pub beam: Beam,
    /// Independent temporal modes per exposure.
    pub temporal_modes: u32,
    pub noise: NoiseBlock,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            n_frames: 500,
            seed: 1,
            beam: Beam::Signal,
            temporal_modes: 1,
            noise: NoiseBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest relative error of a normalized OAM weight. At 500 frames the
    /// statistical error of a weight near 10% of the peak is 10-15%.
    pub oam_rel_tol: f64,
    /// Only weights above this fraction of the largest are compared.
    pub oam_min_fraction: f64,
    /// Largest relative error of the averaged OAM mode count.
    pub count_rel_tol: f64,
    /// Largest relative error of the leading normalized radial weights
    /// (checked only for sources with shared radial profiles).
    pub radial_rel_tol: f64,
    pub radial_top: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            oam_rel_tol: 0.4,
            oam_min_fraction: 0.1,
            count_rel_tol: 0.15,
            radial_rel_tol: 0.25,
            radial_top: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Explicit ring angles; overrides the range below.
    pub theta0: Option<Vec<f64>>,
    pub theta0_min: f64,
    pub theta0_max: f64,
    pub theta0_step: f64,
    /// Radial half-width of each ring.
    pub azimuthal_halfwidth: f64,
    pub azimuthal_bins: usize,
    /// Charges reported per spectrum; all resolvable ones when absent.
    pub l_max: Option<u32>,
    pub radial_theta_min: f64,
    pub radial_theta_max: f64,
    pub radial_bins: usize,
    /// Azimuthal half-width of each ray.
    pub radial_halfwidth: f64,
    /// Rays evenly spaced in φ starting at `radial_phi0`; their covariance
    /// matrices are averaged.
    pub radial_rays: usize,
    pub radial_phi0: f64,
    /// Strongest radial modes reported and normalized together.
    pub radial_modes: usize,
    pub interpolation: SliceInterpolation,
    pub jackknife_blocks: usize,
    pub phase_points: usize,
    pub thresholds: Thresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            theta0: None,
            theta0_min: 5e-4,
            theta0_max: 1.45e-2,
            theta0_step: 5e-4,
            azimuthal_halfwidth: 2.5e-4,
            azimuthal_bins: 128,
            l_max: None,
            radial_theta_min: 2.5e-4,
            radial_theta_max: 1.475e-2,
            radial_bins: 29,
            radial_halfwidth: 0.08,
            radial_rays: 16,
            radial_phi0: 0.0,
            radial_modes: 5,
            interpolation: SliceInterpolation::Bicubic,
            jackknife_blocks: 10,
            phase_points: 64,
            thresholds: Thresholds::default(),
        }
    }
}

impl AnalysisConfig {
    /// Ring angles in ascending order.
    pub fn rings(&self) -> Vec<f64> {
        match &self.theta0 {
            Some(list) => list.clone(),
            None => {
                if !(self.theta0_step > 0.0) || !(self.theta0_max >= self.theta0_min) {
                    return Vec::new();
                }
                let n = ((self.theta0_max - self.theta0_min) / self.theta0_step + 1e-9).floor() as usize;
                (0..=n).map(|i| self.theta0_min + i as f64 * self.theta0_step).collect()
            }
        }
    }

    /// Ray directions.
    pub fn rays(&self) -> Vec<f64> {
        let n = self.radial_rays.max(1);
        (0..n)
            .map(|k| self.radial_phi0 + std::f64::consts::TAU * k as f64 / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
    /// File name of the simulated stack inside `dir`.
    pub stack: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            stack: "stack.fstk".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub interferometer: InterferometerBlock,
    pub synthesis: SynthesisConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errs.push(format!("{name}: must be positive and finite, got {v}"));
    }
}

fn nonneg(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v >= 0.0) || !v.is_finite() {
        errs.push(format!("{name}: must be nonnegative and finite, got {v}"));
    }
}

fn at_least(errs: &mut Vec<String>, name: &str, v: usize, min: usize) {
    if v < min {
        errs.push(format!("{name}: must be at least {min}, got {v}"));
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field and reports all violations together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        let s = &self.source;
        if !(s.mu > 0.0 && s.mu < 1.0) {
            e.push(format!("source.mu: must lie in (0, 1), got {}", s.mu));
        }
        if !(s.tail > 0.0 && s.tail < 1.0) {
            e.push(format!("source.tail: must lie in (0, 1), got {}", s.tail));
        }
        positive(&mut e, "source.waist", s.waist);
        positive(&mut e, "source.pitch", s.pitch);
        at_least(&mut e, "source.width", s.width, 8);
        at_least(&mut e, "source.height", s.height, 8);
        at_least(&mut e, "source.basis_bins", s.basis_bins, 16);
        if s.waist > 0.0 && s.pitch > 0.0 && s.basis_bins >= 16 {
            let reach = 0.5 * ((s.width as f64).hypot(s.height as f64) + 2.0) * s.pitch;
            let per_waist = s.waist / (reach / s.basis_bins as f64);
            if per_waist < crate::model::basis::MIN_BINS_PER_WAIST as f64 {
                e.push(format!(
                    "source.basis_bins: {per_waist:.1} bins per waist, need at least {}",
                    crate::model::basis::MIN_BINS_PER_WAIST
                ));
            }
        }

        let i = &self.interferometer;
        nonneg(&mut e, "interferometer.g1", i.g1);
        nonneg(&mut e, "interferometer.g2", i.g2);
        if !i.phi.is_finite() {
            e.push(format!("interferometer.phi: must be finite, got {}", i.phi));
        }
        positive(&mut e, "interferometer.validity_ratio", i.validity_ratio);

        let y = &self.synthesis;
        at_least(&mut e, "synthesis.n_frames", y.n_frames, 1);
        if y.temporal_modes == 0 || y.temporal_modes > 1 << 15 {
            e.push(format!(
                "synthesis.temporal_modes: must lie in [1, 32768], got {}",
                y.temporal_modes
            ));
        }
        nonneg(&mut e, "synthesis.noise.electronic_sigma", y.noise.electronic_sigma);
        nonneg(&mut e, "synthesis.noise.background", y.noise.background);

        let a = &self.analysis;
        let rings = a.rings();
        if rings.is_empty() {
            e.push("analysis.theta0: no ring angles (check theta0_min/max/step)".into());
        }
        if rings.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            e.push("analysis.theta0: ring angles must be positive".into());
        }
        if rings.windows(2).any(|w| !(w[1] > w[0])) {
            e.push("analysis.theta0: ring angles must be strictly increasing".into());
        }
        positive(&mut e, "analysis.azimuthal_halfwidth", a.azimuthal_halfwidth);
        at_least(&mut e, "analysis.azimuthal_bins", a.azimuthal_bins, 8);
        if let Some(l) = a.l_max {
            let lim = (a.azimuthal_bins.max(1) - 1) / 2;
            if l as usize > lim {
                e.push(format!(
                    "analysis.l_max: {} azimuthal bins resolve |l| <= {lim}, got {l}",
                    a.azimuthal_bins
                ));
            }
        }
        nonneg(&mut e, "analysis.radial_theta_min", a.radial_theta_min);
        if !(a.radial_theta_max > a.radial_theta_min) {
            e.push(format!(
                "analysis.radial_theta_max: must exceed radial_theta_min ({} <= {})",
                a.radial_theta_max, a.radial_theta_min
            ));
        }
        at_least(&mut e, "analysis.radial_bins", a.radial_bins, 8);
        positive(&mut e, "analysis.radial_halfwidth", a.radial_halfwidth);
        if a.radial_halfwidth >= std::f64::consts::PI {
            e.push("analysis.radial_halfwidth: must be below π".into());
        }
        at_least(&mut e, "analysis.radial_rays", a.radial_rays, 1);
        if !a.radial_phi0.is_finite() {
            e.push("analysis.radial_phi0: must be finite".into());
        }
        at_least(&mut e, "analysis.radial_modes", a.radial_modes, 1);
        if a.radial_modes > a.radial_bins {
            e.push(format!(
                "analysis.radial_modes: {} modes from {} radial bins",
                a.radial_modes, a.radial_bins
            ));
        }
        if a.thresholds.radial_top > a.radial_modes {
            e.push(format!(
                "analysis.thresholds.radial_top: {} exceeds radial_modes {}",
                a.thresholds.radial_top, a.radial_modes
            ));
        }
        at_least(&mut e, "analysis.jackknife_blocks", a.jackknife_blocks, 2);
        if a.jackknife_blocks > y.n_frames {
            e.push(format!(
                "analysis.jackknife_blocks: {} blocks for {} frames",
                a.jackknife_blocks, y.n_frames
            ));
        }
        at_least(&mut e, "analysis.phase_points", a.phase_points, 2);
        let t = &a.thresholds;
        positive(&mut e, "analysis.thresholds.oam_rel_tol", t.oam_rel_tol);
        if !(t.oam_min_fraction > 0.0 && t.oam_min_fraction <= 1.0) {
            e.push(format!(
                "analysis.thresholds.oam_min_fraction: must lie in (0, 1], got {}",
                t.oam_min_fraction
            ));
        }
        positive(&mut e, "analysis.thresholds.count_rel_tol", t.count_rel_tol);
        positive(&mut e, "analysis.thresholds.radial_rel_tol", t.radial_rel_tol);
        at_least(&mut e, "analysis.thresholds.radial_top", t.radial_top, 1);

        if self.output.stack.is_empty() {
            e.push("output.stack: file name is empty".into());
        }

        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e))
        }
    }
}
