//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so every verdict is printed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schmidt_modes::io::config::Family;
use schmidt_modes::io::{decode_stack, encode_stack, read_stack, write_stack, RunConfig};
use schmidt_modes::model::{build_basis, FrameGeometry, ModeIndex, PolarGrid, RadialFamily, SchmidtSpectrum, SpectrumKind};
use schmidt_modes::pipeline::{
    accumulate_blocks, analyze, build_source, merge_blocks, noise_model, ring_samplers, run_pipeline, Command,
    Frames, OamAnalysis, RadialAnalysis,
};
use schmidt_modes::recon::{analytic_oam_avg, shape_overlap, OamSpectrum};
use schmidt_modes::stats::{siegert_check, CovarianceAccumulator, SliceSampler};
use schmidt_modes::su11::{high_gain_approx, mode_weights, output_spectrum, InterferometerConfig};
use schmidt_modes::synth::{simulate_stack, FieldSynth, NoiseModel};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

const OPERATING_POINT: (f64, f64, f64) = (2.1, 3.3, 3.82);

/// Largest per-mode relative error between the exact output weights and the
/// high-gain form at the operating point over the default source, evaluated
/// independently at 40 significant digits (attained at |l| = 37, p = 18).
const FROZEN_APPROX_ERROR: f64 = 0.28400523205032870275;

fn default_config(frames: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.synthesis.n_frames = frames;
    cfg.synthesis.seed = seed;
    cfg
}

/// Source with five radial modes shared by every charge.
fn radial_config(frames: usize, seed: u64, phi: f64) -> RunConfig {
    let mut cfg = default_config(frames, seed);
    cfg.source.family = Family::SharedRadial;
    cfg.source.l_max = Some(16);
    cfg.source.p_max = Some(4);
    cfg.interferometer.phi = phi;
    cfg.analysis.radial_rays = 32;
    cfg.analysis.radial_modes = 4;
    cfg.analysis.thresholds.radial_top = 4;
    cfg
}

fn run_oam(cfg: &RunConfig) -> (OamAnalysis, OamSpectrum<f64>) {
    let source = build_source(cfg).expect("source");
    let synth = source.synthesizer(cfg).expect("synth");
    let frames = Frames::Synthetic {
        synth: &synth,
        noise: noise_model(cfg),
        n_frames: cfg.synthesis.n_frames,
    };
    let (oam, _) = analyze(&frames, &cfg.analysis, true, false).expect("analysis");
    let truth = analytic_oam_avg(&source.output).unwrap().normalize().unwrap();
    (oam.expect("oam"), truth)
}

fn run_radial(cfg: &RunConfig) -> (RadialAnalysis, schmidt_modes::pipeline::Source) {
    let source = build_source(cfg).expect("source");
    let synth = source.synthesizer(cfg).expect("synth");
    let frames = Frames::Synthetic {
        synth: &synth,
        noise: noise_model(cfg),
        n_frames: cfg.synthesis.n_frames,
    };
    let (_, rad) = analyze(&frames, &cfg.analysis, false, true).expect("analysis");
    (rad.expect("radial"), source)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut worst_rel, mut over) = (0.0f64, 0.0f64, 0);
    for _ in 0..1000 {
        let g1 = rng.gen_range(0.0..=5.0);
        let g2 = rng.gen_range(0.0..=5.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let lambda = 1.0 - rng.gen::<f64>();
        let w = mode_weights(&InterferometerConfig::new(g1, g2, phi).unwrap(), lambda).unwrap();
        let d = w.symplectic_defect().abs();
        if d > 1e-9 {
            over += 1;
        }
        worst = worst.max(d);
        worst_rel = worst_rel.max(d / w.w1.norm_sqr());
    }
    let elapsed = start.elapsed();
    verdict(
        over == 0 && elapsed < Duration::from_secs(1),
        format!(
            "max | |w1|^2 - |w2|^2 - 1 | = {worst:.3e} (limit 1e-9, {over}/1000 draws above; max relative to |w1|^2 {worst_rel:.2e}); {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Input spectrum with `λ` on (0, 0) and the remainder on (1, 0).
fn with_ground(lambda: f64) -> SchmidtSpectrum<f64> {
    let mut w = BTreeMap::from([(ModeIndex::new(0, 0), lambda)]);
    if lambda < 1.0 {
        w.insert(ModeIndex::new(1, 0), 1.0 - lambda);
    }
    SchmidtSpectrum::new(w, SpectrumKind::InputLambda).unwrap()
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut e0, mut epi) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let g1: f64 = rng.gen_range(0.0..=5.0);
        let g2: f64 = rng.gen_range(0.0..=5.0);
        let lambda = 1.0 - rng.gen::<f64>();
        let s = lambda.sqrt();
        let at = |phi: f64| {
            output_spectrum(&InterferometerConfig::new(g1, g2, phi).unwrap(), &with_ground(lambda))
                .unwrap()
                .get(0, 0)
        };
        let want0 = (s * (g1 + g2)).sinh().powi(2);
        let wantpi = (s * (g1 - g2)).sinh().powi(2);
        // Agreement to 1e-9 in the leading digits: relative once Λ exceeds one.
        e0 = e0.max((at(0.0) - want0).abs() / want0.max(1.0));
        epi = epi.max((at(std::f64::consts::PI) - wantpi).abs() / wantpi.max(1.0));
    }
    let cfg = RunConfig::default();
    let source = build_source(&cfg).unwrap();
    let swapped = output_spectrum(&source.interferometer.swapped(), &source.input).unwrap();
    let esw = source
        .output
        .iter()
        .map(|(m, v)| (v - swapped.get(m.l, m.p)).abs() / v)
        .fold(0.0, f64::max);
    verdict(
        e0 <= 1e-9 && epi <= 1e-9 && esw <= 1e-12,
        format!("phi=0 error {e0:.2e}, phi=pi error {epi:.2e} (limit 1e-9); G1<->G2 relative change {esw:.2e} (limit 1e-12)"),
    )
}

/// Neumaier summation, so normalization adds no phase-dependent rounding.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

fn criterion_3() -> Verdict {
    let cfg = RunConfig::default();
    let source = build_source(&cfg).unwrap();
    let norm = |phi: f64| {
        let c = InterferometerConfig::new(2.1, 3.3, phi).unwrap();
        let s = high_gain_approx(&c, &source.input).unwrap();
        let t = compensated_sum(s.iter().map(|(_, v)| v));
        s.iter().map(|(_, v)| v / t).collect::<Vec<_>>()
    };
    let reference = norm(3.82);
    let mut spread = 0.0f64;
    for phi in [0.0, 0.5, 1.7, 3.0, 3.82, 4.22, 5.9] {
        for (a, b) in norm(phi).iter().zip(&reference) {
            spread = spread.max((a - b).abs() / b);
        }
    }
    let (g1, g2, phi) = OPERATING_POINT;
    let c = InterferometerConfig::new(g1, g2, phi).unwrap();
    let exact = output_spectrum(&c, &source.input).unwrap();
    let approx = high_gain_approx(&c, &source.input).unwrap();
    let bound = exact
        .iter()
        .map(|(m, v)| (v - approx.get(m.l, m.p)).abs() / v)
        .fold(0.0, f64::max);
    let drift = (bound - FROZEN_APPROX_ERROR).abs() / FROZEN_APPROX_ERROR;
    verdict(
        spread <= 4.0 * f64::EPSILON && drift <= 1e-9,
        format!(
            "normalized approximation phase spread {spread:.2e} (limit 4 ulp); exact-vs-approx bound {bound:.12} vs frozen {FROZEN_APPROX_ERROR:.12} (drift {drift:.1e})"
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let g = FrameGeometry::centered(64, 5e-4).unwrap();
    let grid = PolarGrid::covering(g, 512, 64).unwrap();
    let basis = build_basis(&grid, 3.5e-3, 0, 0, RadialFamily::LaguerreGauss).unwrap();
    let out = SchmidtSpectrum::new(BTreeMap::from([(ModeIndex::new(0, 0), 50.0)]), SpectrumKind::OutputLambda).unwrap();
    let synth = FieldSynth::new(&out, &basis, g, 4).unwrap();
    let stack = simulate_stack(&synth, 10_000, &NoiseModel::default()).unwrap();
    let mean = stack.mean_frame();
    let peak = mean.iter().copied().fold(0.0, f64::max);
    let pixels: Vec<(usize, usize)> = mean
        .indexed_iter()
        .filter(|(_, v)| **v > 0.1 * peak)
        .map(|((iy, ix), _)| (ix, iy))
        .collect();
    let est = siegert_check(&stack, &pixels).unwrap();
    let worst = est.iter().map(|e| (e.g2 - 2.0).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    verdict(
        worst <= 0.05 && est.len() == pixels.len() && elapsed < Duration::from_secs(30),
        format!(
            "{} pixels, max |g2 - 2| = {worst:.4} (limit 0.05, std. error {:.4}); {:.1} s",
            est.len(),
            est.first().map(|e| e.std_error).unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let cfg = default_config(5000, 1);
    let (oam, truth) = run_oam(&cfg);
    let recon = oam.average.normalize().unwrap();
    let peak = truth.weights.values().copied().fold(0.0, f64::max);
    let mut worst = (0, 0.0f64);
    let mut checked = 0;
    for (&l, &t) in &truth.weights {
        if t >= 0.01 * peak {
            checked += 1;
            let e = (recon.get(l) - t).abs() / t;
            if e > worst.1 {
                worst = (l, e);
            }
        }
    }
    let count_truth = truth.mode_count().unwrap();
    let count_err = (oam.average_count - count_truth).abs() / count_truth;
    let elapsed = start.elapsed();
    verdict(
        worst.1 <= 0.05 && count_err <= 0.10 && elapsed < Duration::from_secs(300),
        format!(
            "{checked} weights >= 1% of max, worst relative error {:.3} at l={} (limit 0.05); count {:.3} vs true {:.3}, error {:.3} (limit 0.10); {:.1} s",
            worst.1,
            worst.0,
            oam.average_count,
            count_truth,
            count_err,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Verdict {
    let cfg = radial_config(5000, 1, OPERATING_POINT.2);
    let (rad, source) = run_radial(&cfg);
    let k = 4;
    let truth: Vec<f64> = source.output.p_marginal().into_values().collect();
    let tsum: f64 = truth[..k].iter().sum();
    let rsum: f64 = rad.modes.weights[..k].iter().sum();
    let werr = (0..k)
        .map(|p| ((rad.modes.weights[p] / rsum) - truth[p] / tsum).abs() / (truth[p] / tsum))
        .fold(0.0, f64::max);
    let ortho = rad.modes.orthonormality_defect(5);
    let overlaps: Vec<f64> = (0..5)
        .map(|p| {
            let reference: Vec<f64> = rad
                .modes
                .thetas
                .iter()
                .map(|t| source.basis.value_at(ModeIndex::new(0, p as u32), *t).unwrap())
                .collect();
            shape_overlap(&rad.modes.shapes[p], &reference)
        })
        .collect();
    let min_overlap = overlaps[..k].iter().copied().fold(1.0, f64::min);
    verdict(
        werr <= 0.07 && ortho <= 1e-8 && min_overlap >= 0.98,
        format!(
            "top-4 weight error {werr:.3} (limit 0.07); orthonormality defect {ortho:.1e} (limit 1e-8); overlaps {} (limit 0.98 on the top 4; p=4 not gated)",
            overlaps.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut cfg = default_config(500, 1);
    let waist = cfg.source.waist;
    cfg.analysis.theta0 = Some((0..7).map(|k| (0.5 + 0.25 * k as f64) * waist).collect());
    let (oam, _) = run_oam(&cfg);
    let counts: Vec<f64> = oam.rings.iter().map(|r| r.count.unwrap_or(f64::NAN)).collect();
    let monotone = counts.windows(2).all(|w| w[1] >= w[0]);
    let size: Vec<f64> = oam.rings.iter().map(|r| r.fwhm.unwrap_or(f64::NAN) * r.theta0).collect();
    let mean = size.iter().sum::<f64>() / size.len() as f64;
    let dev = size.iter().map(|s| (s / mean - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        monotone && dev <= 0.15,
        format!(
            "counts {} (non-decreasing: {monotone}); FWHM*theta0 mean {:.3} mrad, max deviation {dev:.3} (limit 0.15)",
            counts.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>().join(" "),
            mean * 1e3
        ),
    )
}

fn criterion_8() -> Verdict {
    let phases = [3.82, 4.02, 4.22];
    let runs: Vec<RadialAnalysis> = phases
        .iter()
        .enumerate()
        .map(|(i, &phi)| run_radial(&radial_config(500, 31 + i as u64, phi)).0)
        .collect();
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in a + 1..3 {
            for p in 0..runs[a].normalized.len() {
                let se = (runs[a].std_error[p].powi(2) + runs[b].std_error[p].powi(2)).sqrt();
                worst = worst.max((runs[a].normalized[p] - runs[b].normalized[p]).abs() / se);
            }
        }
    }
    let show = |r: &RadialAnalysis| r.normalized.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>().join("/");
    verdict(
        worst <= 3.0,
        format!(
            "weights {} | {} | {}; worst pairwise difference {worst:.2} standard errors (limit 3)",
            show(&runs[0]),
            show(&runs[1]),
            show(&runs[2])
        ),
    )
}

/// Exact covariance of each ring profile for a signal-only thermal stack:
/// `Cov(I_a, I_b) = |G(a, b)|²` at the pixels, mapped through the sampler.
fn analytic_ring_covariances(source: &schmidt_modes::pipeline::Source, samplers: &[SliceSampler<f64>]) -> Vec<Array2<f64>> {
    let g = &source.geometry;
    let grid = source.basis.grid();
    let modes: Vec<(ModeIndex, f64)> = source.output.iter().filter(|(_, w)| *w > 0.0).collect();
    samplers
        .iter()
        .map(|s| {
            let mut pixels: Vec<usize> = (0..s.len()).flat_map(|k| s.bin_weights(k).iter().map(|(i, _)| *i)).collect();
            pixels.sort_unstable();
            pixels.dedup();
            let np = pixels.len();
            // Field amplitude of every mode at every touched pixel.
            let (mut re, mut im) = (Array2::zeros((np, modes.len())), Array2::zeros((np, modes.len())));
            for (a, &i) in pixels.iter().enumerate() {
                let (theta, phi) = g.polar(i % g.width, i / g.width);
                if theta < grid.theta_min {
                    continue;
                }
                let scale = theta.max(grid.theta_floor()).sqrt().recip();
                for (m, (mode, w)) in modes.iter().enumerate() {
                    let v = w.sqrt() * source.basis.value_at(*mode, theta).unwrap() * scale;
                    let arg = mode.l as f64 * phi;
                    re[(a, m)] = v * arg.cos();
                    im[(a, m)] = v * arg.sin();
                }
            }
            let gre = re.dot(&re.t()) + im.dot(&im.t());
            let gim = im.dot(&re.t()) - re.dot(&im.t());
            let k = &gre * &gre + &gim * &gim;
            let mut w = Array2::zeros((s.len(), np));
            for b in 0..s.len() {
                for &(i, v) in s.bin_weights(b) {
                    w[(b, pixels.binary_search(&i).unwrap())] += v;
                }
            }
            w.dot(&k).dot(&w.t())
        })
        .collect()
}

/// Per-seed relative Frobenius errors of the ring covariances and the RMS
/// error of the normalized averaged OAM spectrum.
fn estimator_errors(frames: usize, seeds: &[u64], exact: &[Array2<f64>]) -> (f64, f64) {
    let (mut cov, mut spec) = (0.0, 0.0);
    for &seed in seeds {
        let cfg = default_config(frames, seed);
        let source = build_source(&cfg).unwrap();
        let synth = source.synthesizer(&cfg).unwrap();
        let f = Frames::Synthetic {
            synth: &synth,
            noise: noise_model(&cfg),
            n_frames: frames,
        };
        let samplers = ring_samplers(&cfg.analysis, &source.geometry).unwrap();
        let accs = merge_blocks(&accumulate_blocks(&f, &samplers, 1).unwrap()).unwrap();
        for (acc, want) in accs.iter().zip(exact) {
            let got = acc.finalize().unwrap();
            cov += (&got - want).mapv(|v| v * v).sum() / want.mapv(|v| v * v).sum();
        }
        let oam = schmidt_modes::pipeline::oam_from_accumulators(&accs, &samplers, cfg.analysis.l_max).unwrap();
        let recon = oam.average.normalize().unwrap();
        let truth = analytic_oam_avg(&source.output).unwrap().normalize().unwrap();
        let l_hi = recon.l_max().max(truth.l_max());
        spec += (-l_hi..=l_hi).map(|l| (recon.get(l) - truth.get(l)).powi(2)).sum::<f64>();
    }
    let n = seeds.len() as f64;
    ((cov / (n * exact.len() as f64)).sqrt(), (spec / n).sqrt())
}

fn criterion_9() -> Verdict {
    let cfg = RunConfig::default();
    let source = build_source(&cfg).unwrap();
    let samplers = ring_samplers(&cfg.analysis, &source.geometry).unwrap();
    let exact = analytic_ring_covariances(&source, &samplers);
    let seeds = [101, 102, 103, 104];
    let (c_small, s_small) = estimator_errors(500, &seeds, &exact);
    let (c_large, s_large) = estimator_errors(5000, &seeds, &exact);
    let ratio = c_large / c_small;
    verdict(
        (0.25..=0.45).contains(&ratio),
        format!(
            "ring covariance error {c_small:.4e} at 500 frames, {c_large:.4e} at 5000; ratio {ratio:.3} (range [0.25, 0.45]); OAM spectrum RMS error {s_small:.3e} -> {s_large:.3e}, ratio {:.3} (not gated)",
            s_large / s_small
        ),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn criterion_10() -> Verdict {
    // Round trip.
    let cfg = default_config(20, 3);
    let source = build_source(&cfg).unwrap();
    let synth = source.synthesizer(&cfg).unwrap();
    let stack = simulate_stack(&synth, 20, &NoiseModel::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.fstk");
    write_stack(&stack, &path).unwrap();
    let back = read_stack(&path).unwrap();
    let again = decode_stack(&encode_stack(&back).unwrap()).unwrap();
    let exact = back.geometry() == stack.geometry()
        && [&back, &again].iter().all(|s| {
            s.frames().iter().zip(stack.frames()).all(|(a, b)| {
                a.pixels().iter().zip(b.pixels()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
        });

    // Block-merged against single-pass accumulation.
    let mut cfg = default_config(300, 5);
    cfg.analysis.theta0 = Some(vec![2e-3, 5e-3]);
    let source = build_source(&cfg).unwrap();
    let synth = source.synthesizer(&cfg).unwrap();
    let frames = Frames::Synthetic {
        synth: &synth,
        noise: noise_model(&cfg),
        n_frames: 300,
    };
    let samplers = ring_samplers(&cfg.analysis, &source.geometry).unwrap();
    let merged = merge_blocks(&accumulate_blocks(&frames, &samplers, 7).unwrap()).unwrap();
    let mut merge_err = 0.0f64;
    for (s, m) in samplers.iter().zip(&merged) {
        let mut seq = CovarianceAccumulator::new(s.len());
        for i in 0..300 {
            seq.accumulate(&s.extract(&synth.frame(i)).unwrap()).unwrap();
        }
        let (a, b): (Array2<f64>, Array2<f64>) = (seq.finalize().unwrap(), m.finalize().unwrap());
        let scale = a.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        merge_err = merge_err.max((&a - &b).iter().fold(0.0f64, |x, v| x.max(v.abs())) / scale);
    }

    // Identical CSVs across reruns and thread counts.
    let run = |threads: usize| {
        let d = tempfile::tempdir().unwrap();
        let mut c = default_config(200, 9);
        c.output.dir = d.path().to_path_buf();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_pipeline(Command::Report, &c, None)).unwrap();
        files(d.path())
    };
    let (a, b, c) = (run(1), run(1), run(3));
    let identical = !a.is_empty() && a == b && a == c;
    verdict(
        exact && merge_err <= 1e-10 && identical,
        format!(
            "FSTK bit-exact: {exact}; merged vs sequential covariance {merge_err:.1e} (limit 1e-10); {} CSV files byte-identical across reruns and thread counts: {identical}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "symplectic identity", criterion_1),
        (2, "closed forms and gain symmetry", criterion_2),
        (3, "high-gain approximation", criterion_3),
        (4, "thermal statistics", criterion_4),
        (5, "closed-loop OAM recovery", criterion_5),
        (6, "closed-loop radial recovery", criterion_6),
        (7, "trends over radial angle", criterion_7),
        (8, "phase invariance of radial weights", criterion_8),
        (9, "estimator scaling", criterion_9),
        (10, "plumbing", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let v = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {:<36} {} [{:.1} s] {}",
            name,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
