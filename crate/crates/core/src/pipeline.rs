//! End-to-end runs: source construction, frame acquisition (synthetic or
//! from disk), covariance accumulation, reconstruction and artifact output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::Error;
use crate::io::config::{Beam, Family, SliceInterpolation};
use crate::io::svg::{Plot, Series, Style};
use crate::io::table::{num, Table};
use crate::io::{read_stack, write_stack, AnalysisConfig, ConfigError, FstkError, OutputFormat, RunConfig};
use crate::model::{
    build_basis, geometric_spectrum, geometric_truncation, FrameGeometry, ModeBasis, PolarGrid, RadialFamily,
    SchmidtSpectrum,
};
use crate::recon::{
    analytic_oam_avg, jackknife, oam_spectrum_at, oam_spectrum_avg, radial_modes, total_mode_count, ModeCountReport,
    OamSpectrum, RadialModeSet,
};
use crate::stats::{
    antidiagonal_average, fwhm, CovarianceAccumulator, CovarianceCurve, Interpolation, SliceSampler, SliceSpec,
    PARALLEL_CHUNK,
};
use crate::su11::{approx_validity, output_spectrum, phase_sweep, uniform_phases, InterferometerConfig};
use crate::synth::{add_noise, simulate_stack, BeamMode, FieldSynth, FrameStack, NoiseModel};

/// Failure of a pipeline run, grouped by the exit status it maps to.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// The configuration parses but describes an impossible model or slice.
    #[error("configuration rejected: {0}")]
    Setup(Error),

    #[error(transparent)]
    Stack(#[from] FstkError),

    /// The data could not be analysed.
    #[error("analysis failed: {0}")]
    Analysis(Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Carries the rendered comparison table and the violated checks.
    #[error("{report}verification failed:\n  {}", failures.join("\n  "))]
    Verification { report: String, failures: Vec<String> },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Setup(_) => 2,
            Self::Stack(_) | Self::Analysis(_) | Self::Io { .. } => 3,
            Self::Verification { .. } => 4,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn setup<T>(r: crate::Result<T>) -> Result<T> {
    r.map_err(PipelineError::Setup)
}

fn analysis<T>(r: crate::Result<T>) -> Result<T> {
    r.map_err(PipelineError::Analysis)
}

/// Everything derived from the `source` and `interferometer` blocks.
#[derive(Debug, Clone)]
pub struct Source {
    pub geometry: FrameGeometry<f64>,
    pub interferometer: InterferometerConfig<f64>,
    pub input: SchmidtSpectrum<f64>,
    pub output: SchmidtSpectrum<f64>,
    pub basis: ModeBasis<f64>,
}

pub fn build_source(cfg: &RunConfig) -> Result<Source> {
    let s = &cfg.source;
    let geometry = setup(FrameGeometry::new(
        s.width,
        s.height,
        s.pitch,
        ((s.width / 2) as f64, (s.height / 2) as f64),
    ))?;
    let (l_auto, p_auto) = setup(geometric_truncation(s.mu, s.tail))?;
    let l_max = s.l_max.unwrap_or(l_auto);
    let p_max = s.p_max.unwrap_or(p_auto);
    let input = setup(geometric_spectrum(s.mu, l_max, p_max))?;
    let i = &cfg.interferometer;
    let interferometer = setup(InterferometerConfig::new(i.g1, i.g2, i.phi))?;
    let output = setup(output_spectrum(&interferometer, &input))?;
    let grid = setup(PolarGrid::covering(geometry, s.basis_bins, 64))?;
    let family = match s.family {
        Family::LaguerreGauss => RadialFamily::LaguerreGauss,
        Family::SharedRadial => RadialFamily::SharedRadial,
    };
    let basis = setup(build_basis(&grid, s.waist, l_max, p_max, family))?;
    Ok(Source {
        geometry,
        interferometer,
        input,
        output,
        basis,
    })
}

pub fn noise_model(cfg: &RunConfig) -> NoiseModel {
    let n = &cfg.synthesis.noise;
    NoiseModel {
        electronic_sigma: n.electronic_sigma,
        background: n.background,
        enabled: n.enabled,
    }
}

impl Source {
    pub fn synthesizer(&self, cfg: &RunConfig) -> Result<FieldSynth<f64>> {
        let beam = match cfg.synthesis.beam {
            Beam::Signal => BeamMode::Signal,
            Beam::Twin => BeamMode::Twin,
        };
        let synth = setup(FieldSynth::new(&self.output, &self.basis, self.geometry, cfg.synthesis.seed))?;
        setup(synth.with_beam(beam).with_temporal_modes(cfg.synthesis.temporal_modes))
    }
}

/// Where analysed frames come from.
pub enum Frames<'a> {
    Stack(&'a FrameStack),
    /// Generated on demand; identical to the frames `simulate` writes.
    Synthetic {
        synth: &'a FieldSynth<f64>,
        noise: NoiseModel,
        n_frames: usize,
    },
}

impl Frames<'_> {
    pub fn len(&self) -> usize {
        match self {
            Self::Stack(s) => s.len(),
            Self::Synthetic { n_frames, .. } => *n_frames,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn geometry(&self) -> FrameGeometry<f64> {
        match self {
            Self::Stack(s) => *s.geometry(),
            Self::Synthetic { synth, .. } => *synth.geometry(),
        }
    }

    fn profiles(&self, i: usize, samplers: &[SliceSampler<f64>]) -> crate::Result<Vec<Vec<f64>>> {
        match self {
            Self::Stack(s) => samplers.iter().map(|m| m.extract(&s.frames()[i])).collect(),
            Self::Synthetic { synth, noise, .. } => {
                let f = add_noise(&synth.frame(i as u64), noise, synth.seed(), i as u64)?;
                samplers.iter().map(|m| m.extract(&f)).collect()
            }
        }
    }
}

type Accs = Vec<CovarianceAccumulator<f64>>;

/// Chunks processed concurrently before merging.
const CHUNK_GROUP: usize = 32;

/// Accumulates every slice over `n_blocks` contiguous frame blocks;
/// `result[b][s]` covers slice `s` in block `b`. Chunk boundaries and merge
/// order are fixed, so results do not depend on the thread count.
pub fn accumulate_blocks(
    frames: &Frames<'_>,
    samplers: &[SliceSampler<f64>],
    n_blocks: usize,
) -> crate::Result<Vec<Accs>> {
    let n = frames.len();
    if n_blocks == 0 || n_blocks > n {
        return Err(Error::InsufficientData {
            have: n,
            need: n_blocks.max(1),
        });
    }
    let fresh = || -> Accs { samplers.iter().map(|s| CovarianceAccumulator::new(s.len())).collect() };
    let chunks: Vec<(usize, usize, usize)> = (0..n_blocks)
        .flat_map(|b| {
            let (lo, hi) = (b * n / n_blocks, (b + 1) * n / n_blocks);
            (lo..hi)
                .step_by(PARALLEL_CHUNK)
                .map(move |s| (b, s, (s + PARALLEL_CHUNK).min(hi)))
        })
        .collect();
    let mut blocks: Vec<Accs> = (0..n_blocks).map(|_| fresh()).collect();
    for group in chunks.chunks(CHUNK_GROUP) {
        let parts = group
            .par_iter()
            .map(|&(_, lo, hi)| {
                let mut accs = fresh();
                for i in lo..hi {
                    for (a, p) in accs.iter_mut().zip(frames.profiles(i, samplers)?) {
                        a.accumulate(&p)?;
                    }
                }
                Ok(accs)
            })
            .collect::<crate::Result<Vec<Accs>>>()?;
        for (&(b, _, _), part) in group.iter().zip(parts) {
            let current = std::mem::take(&mut blocks[b]);
            blocks[b] = current
                .into_iter()
                .zip(part)
                .map(|(a, p)| a.merge(p))
                .collect::<crate::Result<_>>()?;
        }
    }
    Ok(blocks)
}

/// Merges blocks in order.
pub fn merge_blocks(blocks: &[Accs]) -> crate::Result<Accs> {
    let mut it = blocks.iter();
    let first = it.next().ok_or(Error::InsufficientData { have: 0, need: 1 })?.clone();
    it.try_fold(first, |acc, b| {
        acc.into_iter().zip(b.iter().cloned()).map(|(a, x)| a.merge(x)).collect()
    })
}

fn interpolation(a: &AnalysisConfig) -> Interpolation {
    match a.interpolation {
        SliceInterpolation::Bicubic => Interpolation::Bicubic,
        SliceInterpolation::Bilinear => Interpolation::Bilinear,
        SliceInterpolation::PixelBinning => Interpolation::PixelBinning,
    }
}

pub fn ring_samplers(a: &AnalysisConfig, g: &FrameGeometry<f64>) -> crate::Result<Vec<SliceSampler<f64>>> {
    a.rings()
        .into_iter()
        .map(|t| {
            let spec = SliceSpec::azimuthal(t, a.azimuthal_halfwidth, a.azimuthal_bins).with_interpolation(interpolation(a));
            SliceSampler::new(spec, g)
        })
        .collect()
}

pub fn ray_samplers(a: &AnalysisConfig, g: &FrameGeometry<f64>) -> crate::Result<Vec<SliceSampler<f64>>> {
    a.rays()
        .into_iter()
        .map(|phi| {
            let spec = SliceSpec::radial(
                phi,
                a.radial_theta_min,
                a.radial_theta_max,
                a.radial_halfwidth,
                a.radial_bins,
            )
            .with_interpolation(interpolation(a));
            SliceSampler::new(spec, g)
        })
        .collect()
}

/// One probed ring.
#[derive(Debug, Clone)]
pub struct RingResult {
    pub theta0: f64,
    pub curve: CovarianceCurve<f64>,
    pub spectrum: OamSpectrum<f64>,
    /// `None` when the curve has no resolvable peak.
    pub fwhm: Option<f64>,
    pub count: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OamAnalysis {
    pub n_frames: usize,
    pub rings: Vec<RingResult>,
    pub average: OamSpectrum<f64>,
    pub average_count: f64,
}

pub fn oam_from_accumulators(
    accs: &[CovarianceAccumulator<f64>],
    samplers: &[SliceSampler<f64>],
    l_max: Option<u32>,
) -> crate::Result<OamAnalysis> {
    let mut rings = Vec::with_capacity(accs.len());
    let mut n_frames = 0;
    for (acc, sampler) in accs.iter().zip(samplers) {
        let spec = *sampler.spec();
        let crate::stats::SliceKind::Azimuthal { theta0 } = spec.kind else {
            return Err(Error::Shape("OAM analysis needs azimuthal slices".into()));
        };
        n_frames = acc.count() as usize;
        let curve = antidiagonal_average(&acc.finalize()?, acc.count(), Some(spec))?;
        let spectrum = oam_spectrum_at(&curve, l_max)?;
        let width = match fwhm(&curve) {
            Ok(w) => Some(w),
            Err(Error::UndefinedWidth) => None,
            Err(e) => return Err(e),
        };
        let count = match spectrum.mode_count() {
            Ok(c) => Some(c),
            Err(Error::UndefinedCount) => None,
            Err(e) => return Err(e),
        };
        rings.push(RingResult {
            theta0,
            curve,
            spectrum,
            fwhm: width,
            count,
        });
    }
    let pairs: Vec<(f64, CovarianceCurve<f64>)> = rings.iter().map(|r| (r.theta0, r.curve.clone())).collect();
    let average = oam_spectrum_avg(&pairs, l_max)?;
    let average_count = average.mode_count()?;
    Ok(OamAnalysis {
        n_frames,
        rings,
        average,
        average_count,
    })
}

#[derive(Debug, Clone)]
pub struct RadialAnalysis {
    pub n_frames: usize,
    /// Covariance averaged over the probed rays.
    pub covariance: Array2<f64>,
    pub modes: RadialModeSet<f64>,
    /// Leading weights normalized to unit sum, with jackknife errors.
    pub normalized: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Ray-averaged covariance and its radial modes.
pub fn radial_from_covariances(covs: &[Array2<f64>], thetas: &[f64]) -> crate::Result<(Array2<f64>, RadialModeSet<f64>)> {
    let first = covs.first().ok_or(Error::InsufficientData { have: 0, need: 1 })?;
    let mut mean = Array2::zeros(first.dim());
    for c in covs {
        if c.dim() != first.dim() {
            return Err(Error::Shape("rays differ in bin count".into()));
        }
        mean += c;
    }
    mean /= covs.len() as f64;
    let modes = radial_modes(&mean, thetas)?;
    Ok((mean, modes))
}

pub fn radial_from_blocks(
    blocks: &[Accs],
    samplers: &[SliceSampler<f64>],
    n_modes: usize,
) -> crate::Result<RadialAnalysis> {
    let thetas = samplers
        .first()
        .ok_or(Error::InsufficientData { have: 0, need: 1 })?
        .spec()
        .centres();
    let merged = merge_blocks(blocks)?;
    let covs = merged.iter().map(|a| a.finalize()).collect::<crate::Result<Vec<_>>>()?;
    let (covariance, modes) = radial_from_covariances(&covs, &thetas)?;
    let k = n_modes.min(modes.len());
    let jk = jackknife(blocks, |c| radial_from_covariances(c, &thetas)?.1.normalized_weights(k))?;
    Ok(RadialAnalysis {
        n_frames: merged[0].count() as usize,
        covariance,
        modes,
        normalized: jk.value,
        std_error: jk.std_error,
    })
}

/// Runs the requested analyses in one pass over the frames.
pub fn analyze(
    frames: &Frames<'_>,
    a: &AnalysisConfig,
    want_oam: bool,
    want_radial: bool,
) -> Result<(Option<OamAnalysis>, Option<RadialAnalysis>)> {
    let g = frames.geometry();
    let rings = if want_oam { setup(ring_samplers(a, &g))? } else { Vec::new() };
    let rays = if want_radial { setup(ray_samplers(a, &g))? } else { Vec::new() };
    let all: Vec<SliceSampler<f64>> = rings.iter().chain(&rays).cloned().collect();
    let blocks = analysis(accumulate_blocks(frames, &all, a.jackknife_blocks))?;
    let nr = rings.len();
    let oam = if want_oam {
        let merged = analysis(merge_blocks(&blocks))?;
        Some(analysis(oam_from_accumulators(&merged[..nr], &rings, a.l_max))?)
    } else {
        None
    };
    let radial = if want_radial {
        let ray_blocks: Vec<Accs> = blocks.iter().map(|b| b[nr..].to_vec()).collect();
        Some(analysis(radial_from_blocks(&ray_blocks, &rays, a.radial_modes))?)
    } else {
        None
    };
    Ok((oam, radial))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub l: i32,
    pub truth: f64,
    pub reconstructed: f64,
    pub rel_error: f64,
    /// Whether the row takes part in the pass/fail decision.
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub oam: Vec<VerifyRow>,
    pub count_truth: f64,
    pub count_reconstructed: f64,
    /// `(p, truth, reconstructed)` for the leading radial weights, when the
    /// source has l-independent radial profiles.
    pub radial: Vec<(usize, f64, f64)>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5} {:>12} {:>14} {:>10}  checked", "l", "true", "reconstructed", "rel.err");
        for r in &self.oam {
            let _ = writeln!(
                s,
                "{:>5} {:>12.6} {:>14.6} {:>10.4}  {}",
                r.l,
                r.truth,
                r.reconstructed,
                r.rel_error,
                if r.checked { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            s,
            "OAM mode count: true {:.4}, reconstructed {:.4}",
            self.count_truth, self.count_reconstructed
        );
        for (p, t, r) in &self.radial {
            let _ = writeln!(s, "radial p={p}: true {t:.6}, reconstructed {r:.6}");
        }
        let _ = writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Compares reconstructed spectra with the ground truth of `source`.
pub fn verify(cfg: &RunConfig, source: &Source, oam: &OamAnalysis, radial: Option<&RadialAnalysis>) -> Result<VerifyReport> {
    let th = &cfg.analysis.thresholds;
    let truth = analytic_oam_avg(&source.output)
        .and_then(|s| s.normalize())
        .map_err(PipelineError::Setup)?;
    let recon = analysis(oam.average.normalize())?;
    let peak = truth.weights.values().copied().fold(0.0, f64::max);
    let mut failures = Vec::new();
    let l_hi = truth.l_max();
    let rows: Vec<VerifyRow> = (-l_hi..=l_hi)
        .map(|l| {
            let (t, r) = (truth.get(l), recon.get(l));
            let rel_error = if t > 0.0 { (r - t).abs() / t } else { f64::INFINITY };
            VerifyRow {
                l,
                truth: t,
                reconstructed: r,
                rel_error,
                checked: t >= th.oam_min_fraction * peak,
            }
        })
        .collect();
    for r in rows.iter().filter(|r| r.checked && r.rel_error > th.oam_rel_tol) {
        failures.push(format!(
            "l={}: relative error {:.4} exceeds {}",
            r.l, r.rel_error, th.oam_rel_tol
        ));
    }
    let count_truth = analysis(truth.mode_count())?;
    let count_err = (oam.average_count - count_truth).abs() / count_truth;
    if count_err > th.count_rel_tol {
        failures.push(format!(
            "OAM mode count {:.4} vs {:.4}: relative error {:.4} exceeds {}",
            oam.average_count, count_truth, count_err, th.count_rel_tol
        ));
    }
    let mut radial_rows = Vec::new();
    if let (Some(rad), RadialFamily::SharedRadial) = (radial, source.basis.family()) {
        let mut marg: Vec<f64> = source.output.p_marginal().into_values().collect();
        marg.sort_by(|a, b| b.total_cmp(a));
        let k = th.radial_top.min(marg.len()).min(rad.normalized.len());
        let tsum: f64 = marg[..k].iter().sum();
        let rsum: f64 = rad.normalized[..k].iter().sum();
        for p in 0..k {
            let (t, r) = (marg[p] / tsum, rad.normalized[p] / rsum);
            radial_rows.push((p, t, r));
            let e = (r - t).abs() / t;
            if e > th.radial_rel_tol {
                failures.push(format!(
                    "radial p={p}: relative error {e:.4} exceeds {}",
                    th.radial_rel_tol
                ));
            }
        }
    }
    Ok(VerifyReport {
        oam: rows,
        count_truth,
        count_reconstructed: oam.average_count,
        radial: radial_rows,
        failures,
    })
}

/// Writes tables and plots into one directory.
pub struct Artifacts {
    dir: PathBuf,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, format: OutputFormat) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn io(&self, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError {
        let path = path.display().to_string();
        move |source| PipelineError::Io { path, source }
    }

    /// Path inside the output directory, recorded as written.
    fn claim(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        if self.format.csv() {
            let p = self.claim(&format!("{name}.csv"));
            t.write(&p).map_err(self.io(&p))?;
        }
        Ok(())
    }

    pub fn plot(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if self.format.svg() {
            let p = self.claim(&format!("{name}.svg"));
            plot.write(&p).map_err(self.io(&p))?;
        }
        Ok(())
    }

    pub fn stack(&mut self, name: &str, stack: &FrameStack) -> Result<()> {
        let p = self.claim(name);
        write_stack(stack, &p)?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.claim(name);
        std::fs::write(&p, body).map_err(self.io(&p))
    }
}

pub fn spectrum_table(s: &SchmidtSpectrum<f64>, column: &str) -> Table {
    let mut t = Table::new(["l", "p", column]);
    for (m, w) in s.iter() {
        t.push(vec![m.l.to_string(), m.p.to_string(), num(w)]);
    }
    t
}

pub fn sweep_table(points: &[(f64, f64)]) -> Table {
    let mut t = Table::new(["phi_rad", "total_photons"]);
    for (phi, n) in points {
        t.push_nums(&[*phi, *n]);
    }
    t
}

fn oam_spectrum_table(s: &OamSpectrum<f64>) -> Result<Table> {
    let n = analysis(s.normalize())?;
    let mut t = Table::new(["l", "weight", "normalized_weight"]);
    for (l, w) in &s.weights {
        t.push(vec![l.to_string(), num(*w), num(n.get(*l))]);
    }
    Ok(t)
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_oam(out: &mut Artifacts, oam: &OamAnalysis) -> Result<()> {
    let mut rings = Table::new(["theta0_rad", "l", "weight", "normalized_weight"]);
    let mut widths = Table::new(["theta0_rad", "fwhm_rad", "fwhm_times_theta0_rad", "mode_count"]);
    let mut curves = Table::new(["theta0_rad", "dphi_rad", "covariance"]);
    for r in &oam.rings {
        let norm = r.spectrum.normalize().ok();
        for (l, w) in &r.spectrum.weights {
            rings.push(vec![
                num(r.theta0),
                l.to_string(),
                num(*w),
                opt(norm.as_ref().map(|n| n.get(*l))),
            ]);
        }
        widths.push(vec![
            num(r.theta0),
            opt(r.fwhm),
            opt(r.fwhm.map(|w| w * r.theta0)),
            opt(r.count),
        ]);
        let (x, y) = r.curve.extended();
        for (dx, c) in x.iter().zip(&y) {
            curves.push_nums(&[r.theta0, *dx, *c]);
        }
    }
    out.table("oam_rings", &rings)?;
    out.table("oam_average", &oam_spectrum_table(&oam.average)?)?;
    out.table("fwhm", &widths)?;
    out.table("covariance_curves", &curves)?;

    let n = oam.rings.len();
    let mut curve_plot = Plot::new("Azimuthal covariance", "phi - phi' (rad)", "covariance");
    for &k in &[0, n / 2, n.saturating_sub(1)] {
        if let Some(r) = oam.rings.get(k) {
            let (x, y) = r.curve.extended();
            curve_plot = curve_plot.with(Series::new(
                format!("theta0 = {:.2} mrad", r.theta0 * 1e3),
                x.into_iter().zip(y).collect(),
                Style::Line,
            ));
        }
    }
    out.plot("covariance_curves", &curve_plot)?;
    let pts = |f: &dyn Fn(&RingResult) -> Option<f64>| -> Vec<(f64, f64)> {
        oam.rings.iter().filter_map(|r| f(r).map(|v| (r.theta0 * 1e3, v))).collect()
    };
    out.plot(
        "fwhm",
        &Plot::new("Speckle width", "theta0 (mrad)", "FWHM (rad)")
            .with(Series::new("", pts(&|r| r.fwhm), Style::Markers)),
    )?;
    out.plot(
        "fwhm_times_theta0",
        &Plot::new("Speckle size in Cartesian angle", "theta0 (mrad)", "FWHM x theta0 (mrad)")
            .with(Series::new("", pts(&|r| r.fwhm.map(|w| w * r.theta0 * 1e3)), Style::Markers)),
    )?;
    out.plot(
        "oam_counts",
        &Plot::new("Azimuthal mode count", "theta0 (mrad)", "K")
            .with(Series::new("", pts(&|r| r.count), Style::Markers)),
    )?;
    let avg = analysis(oam.average.normalize())?;
    out.plot(
        "oam_average",
        &Plot::new("Radially averaged OAM spectrum", "l", "normalized weight").with(Series::new(
            "",
            avg.weights.iter().map(|(l, w)| (*l as f64, *w)).collect(),
            Style::Bars,
        )),
    )?;
    Ok(())
}

pub fn write_radial(out: &mut Artifacts, rad: &RadialAnalysis) -> Result<()> {
    let thetas = &rad.modes.thetas;
    let mut cov = Table::new(std::iter::once("theta_rad".to_string()).chain(thetas.iter().map(|t| num(*t))));
    for (i, t) in thetas.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(rad.covariance.row(i).iter());
        cov.push_nums(&row);
    }
    out.table("radial_covariance", &cov)?;

    let mut modes = Table::new(["p", "weight", "normalized_weight", "std_error"]);
    for (p, w) in rad.modes.weights.iter().enumerate() {
        let (n, e) = (rad.normalized.get(p).copied(), rad.std_error.get(p).copied());
        modes.push(vec![p.to_string(), num(*w), opt(n), opt(e)]);
    }
    out.table("radial_modes", &modes)?;

    let k = rad.normalized.len();
    let mut shapes = Table::new(std::iter::once("theta_rad".to_string()).chain((0..k).map(|p| format!("u_{p}"))));
    for (i, t) in thetas.iter().enumerate() {
        let mut row = vec![*t];
        row.extend((0..k).map(|p| rad.modes.shapes[p][i]));
        shapes.push_nums(&row);
    }
    out.table("radial_shapes", &shapes)?;

    let mut plot = Plot::new("Radial mode shapes", "theta (mrad)", "u_p(theta)");
    for p in 0..k {
        plot = plot.with(Series::new(
            format!("p = {p}"),
            thetas.iter().zip(&rad.modes.shapes[p]).map(|(t, u)| (t * 1e3, *u)).collect(),
            Style::Line,
        ));
    }
    out.plot("radial_shapes", &plot)?;
    out.plot(
        "radial_weights",
        &Plot::new("Radial mode weights", "p", "normalized weight").with(Series::new(
            "",
            rad.normalized.iter().enumerate().map(|(p, w)| (p as f64, *w)).collect(),
            Style::Bars,
        )),
    )?;
    Ok(())
}

pub fn write_counts(out: &mut Artifacts, report: &ModeCountReport<f64>) -> Result<()> {
    let mut t = Table::new(["quantity", "value"]);
    t.push(vec!["azimuthal_average".into(), num(report.azimuthal_avg)]);
    t.push(vec!["radial".into(), num(report.radial)]);
    t.push(vec!["total".into(), num(report.total)]);
    t.push(vec!["two_sided".into(), report.two_sided.to_string()]);
    out.table("mode_counts", &t)
}

pub fn validity_table(cfg: &RunConfig, source: &Source) -> Result<Table> {
    let mut t = Table::new(["l", "p", "lambda", "lhs", "rhs", "ratio", "valid"]);
    for (m, lambda) in source.input.iter() {
        let v = setup(approx_validity(&source.interferometer, lambda, cfg.interferometer.validity_ratio))?;
        t.push(vec![
            m.l.to_string(),
            m.p.to_string(),
            num(lambda),
            num(v.lhs),
            num(v.rhs),
            num(v.ratio()),
            v.valid.to_string(),
        ]);
    }
    Ok(t)
}

fn write_sweep(out: &mut Artifacts, cfg: &RunConfig, source: &Source) -> Result<Vec<(f64, f64)>> {
    let i = &cfg.interferometer;
    let points = setup(phase_sweep(
        i.g1,
        i.g2,
        &uniform_phases::<f64>(cfg.analysis.phase_points),
        &source.input,
    ))?;
    out.table("phase_sweep", &sweep_table(&points))?;
    out.plot(
        "phase_sweep",
        &Plot::new("Interference fringe", "phi (rad)", "total photons")
            .with(Series::new("", points.clone(), Style::Line)),
    )?;
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    PhaseSweep,
    Oam,
    Radial,
    Report,
    Verify,
}

/// Result of a successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Human-readable lines for the terminal.
    pub messages: Vec<String>,
}

/// Executes one subcommand. `input` replaces synthesis with a stored stack
/// for the analysis commands.
pub fn run_pipeline(cmd: Command, cfg: &RunConfig, input: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let mut out = Artifacts::new(&cfg.output.dir, cfg.output.format)?;
    let mut messages = Vec::new();
    let source = build_source(cfg)?;
    let stored = match (cmd, input) {
        (Command::Oam | Command::Radial | Command::Report, Some(p)) => Some(read_stack(p)?),
        _ => None,
    };
    let synth;
    let frames = match &stored {
        Some(s) => Frames::Stack(s),
        None => {
            synth = source.synthesizer(cfg)?;
            Frames::Synthetic {
                synth: &synth,
                noise: noise_model(cfg),
                n_frames: cfg.synthesis.n_frames,
            }
        }
    };

    match cmd {
        Command::Simulate => {
            let Frames::Synthetic { synth, noise, n_frames } = &frames else {
                unreachable!("simulate never reads a stack")
            };
            let stack = setup(simulate_stack(*synth, *n_frames, noise))?;
            out.stack(&cfg.output.stack, &stack)?;
            out.table("output_spectrum", &spectrum_table(&source.output, "Lambda"))?;
            messages.push(format!("simulated {} frames", stack.len()));
        }
        Command::PhaseSweep => {
            let points = write_sweep(&mut out, cfg, &source)?;
            let (phi, n) = points
                .iter()
                .copied()
                .fold((f64::NAN, f64::INFINITY), |a, p| if p.1 < a.1 { p } else { a });
            messages.push(format!("fringe minimum {n:.6e} photons at phi = {phi:.6} rad"));
        }
        Command::Oam => {
            let (oam, _) = analyze(&frames, &cfg.analysis, true, false)?;
            let oam = oam.expect("requested");
            write_oam(&mut out, &oam)?;
            messages.push(format!("radially averaged OAM mode count {:.4}", oam.average_count));
        }
        Command::Radial => {
            let (_, rad) = analyze(&frames, &cfg.analysis, false, true)?;
            let rad = rad.expect("requested");
            write_radial(&mut out, &rad)?;
            messages.push(format!("radial mode count {:.4}", analysis(rad.modes.mode_count())?));
        }
        Command::Report | Command::Verify => {
            let (oam, rad) = analyze(&frames, &cfg.analysis, true, true)?;
            let (oam, rad) = (oam.expect("requested"), rad.expect("requested"));
            write_oam(&mut out, &oam)?;
            write_radial(&mut out, &rad)?;
            let counts = total_mode_count(
                oam.rings.iter().filter_map(|r| r.count.map(|c| (r.theta0, c))).collect(),
                oam.average_count,
                analysis(rad.modes.mode_count())?,
            );
            write_counts(&mut out, &counts)?;
            messages.push(format!(
                "mode counts: azimuthal {:.4} x radial {:.4} = {:.4}",
                counts.azimuthal_avg, counts.radial, counts.total
            ));
            if cmd == Command::Report {
                write_sweep(&mut out, cfg, &source)?;
                out.table("output_spectrum", &spectrum_table(&source.output, "Lambda"))?;
                out.table("validity", &validity_table(cfg, &source)?)?;
            } else {
                let report = verify(cfg, &source, &oam, Some(&rad))?;
                let mut t = Table::new(["l", "true_normalized", "reconstructed_normalized", "rel_error", "checked"]);
                for r in &report.oam {
                    t.push(vec![
                        r.l.to_string(),
                        num(r.truth),
                        num(r.reconstructed),
                        num(r.rel_error),
                        r.checked.to_string(),
                    ]);
                }
                out.table("verify", &t)?;
                if !report.passed() {
                    return Err(PipelineError::Verification {
                        report: report.render(),
                        failures: report.failures,
                    });
                }
                messages.push(report.render());
            }
        }
    }
    out.text("run_config.toml", &cfg.to_toml())?;
    Ok(RunSummary {
        files: out.written().to_vec(),
        messages,
    })
}
