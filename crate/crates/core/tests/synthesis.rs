use std::collections::BTreeMap;

use schmidt_modes::io::RunConfig;
use schmidt_modes::model::{build_lg_basis, FrameGeometry, ModeBasis, ModeIndex, PolarGrid, SchmidtSpectrum, SpectrumKind};
use schmidt_modes::pipeline::build_source;
use schmidt_modes::su11::mean_intensity;
use schmidt_modes::synth::{BeamMode, FieldSynth};

fn relative_l2(sum: &[f64], n: usize, want: &[f64]) -> f64 {
    let num: f64 = sum.iter().zip(want).map(|(s, w)| (s / n as f64 - w).powi(2)).sum();
    let den: f64 = want.iter().map(|w| w * w).sum();
    (num / den).sqrt()
}

#[test]
fn mean_frame_converges_to_the_photon_profile() {
    let cfg = RunConfig::default();
    let source = build_source(&cfg).unwrap();
    let synth = source.synthesizer(&cfg).unwrap();
    let g = source.geometry;
    let grid = source.basis.grid();
    let want: Vec<f64> = (0..g.height)
        .flat_map(|iy| (0..g.width).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| {
            let (theta, _) = g.polar(ix, iy);
            if theta < grid.theta_min {
                0.0
            } else {
                mean_intensity(&source.output, &source.basis, theta).unwrap()
            }
        })
        .collect();
    let mut sum = vec![0.0; want.len()];
    let mut errors = Vec::new();
    for f in 0..5000u64 {
        for (s, v) in sum.iter_mut().zip(synth.intensity(f)) {
            *s += v;
        }
        if f + 1 == 500 || f + 1 == 5000 {
            errors.push(relative_l2(&sum, f as usize + 1, &want));
        }
    }
    assert!(errors[1] < 0.05, "{errors:?}");
    let ratio = errors[1] / errors[0];
    assert!((0.25..=0.45).contains(&ratio), "{errors:?} ratio {ratio}");
}

fn small_setup() -> (FrameGeometry<f64>, ModeBasis<f64>) {
    let geom = FrameGeometry::centered(24, 1.0).unwrap();
    let grid = PolarGrid::covering(geom, 192, 64).unwrap();
    (geom, build_lg_basis(&grid, 4.0, 2, 1).unwrap())
}

fn spectrum(modes: &[(i32, u32, f64)]) -> SchmidtSpectrum<f64> {
    let w: BTreeMap<_, _> = modes.iter().map(|&(l, p, v)| (ModeIndex::new(l, p), v)).collect();
    SchmidtSpectrum::new(w, SpectrumKind::OutputLambda).unwrap()
}

/// Field correlation `⟨E(a) E*(b)⟩` at two pixels.
fn correlation(
    out: &SchmidtSpectrum<f64>,
    basis: &ModeBasis<f64>,
    g: &FrameGeometry<f64>,
    a: (usize, usize),
    b: (usize, usize),
) -> num_complex::Complex<f64> {
    let (ta, pa) = g.polar(a.0, a.1);
    let (tb, pb) = g.polar(b.0, b.1);
    out.iter()
        .map(|(m, w)| {
            let r = w * basis.value_at(m, ta).unwrap() * basis.value_at(m, tb).unwrap() / (ta * tb).sqrt();
            num_complex::Complex::from_polar(r, m.l as f64 * (pa - pb))
        })
        .sum()
}

fn sample_covariance(synth: &FieldSynth<f64>, width: usize, pairs: &[((usize, usize), (usize, usize))], n: u64) -> Vec<f64> {
    let mut s = vec![(0.0, 0.0, 0.0); pairs.len()];
    for f in 0..n {
        let frame = synth.intensity(f);
        for (acc, (a, b)) in s.iter_mut().zip(pairs) {
            let (x, y) = (frame[a.1 * width + a.0], frame[b.1 * width + b.0]);
            acc.0 += x;
            acc.1 += y;
            acc.2 += x * y;
        }
    }
    let n = n as f64;
    s.iter().map(|(x, y, xy)| (xy - x * y / n) / (n - 1.0)).collect()
}

#[test]
fn two_charge_covariance_follows_the_cosine_law() {
    let (g, basis) = small_setup();
    let out = spectrum(&[(1, 0, 1.0), (-1, 0, 1.0)]);
    let synth = FieldSynth::new(&out, &basis, g, 11).unwrap();
    // Pixels on a ring of radius 5 around the centre (12, 12).
    let a = (17, 12);
    let others = [(17, 12), (16, 15), (12, 17), (9, 16), (7, 12), (8, 9), (12, 7)];
    let pairs: Vec<_> = others.iter().map(|&b| (a, b)).collect();
    let got = sample_covariance(&synth, 24, &pairs, 40_000);
    let (ta, pa) = g.polar(a.0, a.1);
    for (&b, c) in others.iter().zip(&got) {
        let (tb, pb) = g.polar(b.0, b.1);
        let radial = basis.value_at(ModeIndex::new(1, 0), ta).unwrap() * basis.value_at(ModeIndex::new(1, 0), tb).unwrap()
            / (ta * tb).sqrt();
        let want = (2.0 * radial * (pa - pb).cos()).powi(2);
        let scale = 4.0 * radial * radial;
        assert!((c - want).abs() < 0.04 * scale, "{b:?}: {c} vs {want}");
        assert!((want - correlation(&out, &basis, &g, a, b).norm_sqr()).abs() < 1e-12 * scale);
    }
}

#[test]
fn twin_covariance_has_mirrored_terms() {
    let (g, basis) = small_setup();
    let out = spectrum(&[(0, 0, 1.0), (2, 0, 0.6), (-1, 1, 0.4)]);
    let signal = FieldSynth::new(&out, &basis, g, 21).unwrap();
    let twin = FieldSynth::new(&out, &basis, g, 21).unwrap().with_beam(BeamMode::Twin);
    let mirror = |p: (usize, usize)| (24 - p.0, 24 - p.1);
    let pairs = [((15, 13), (9, 11)), ((15, 13), (14, 12)), ((16, 10), (8, 14)), ((13, 17), (11, 7))];
    let n = 40_000;
    let got_twin = sample_covariance(&twin, 24, &pairs, n);
    let got_signal = sample_covariance(&signal, 24, &pairs, n);
    for (((a, b), t), s) in pairs.iter().zip(&got_twin).zip(&got_signal) {
        let (ma, mb) = (mirror(*a), mirror(*b));
        let c = |x, y| correlation(&out, &basis, &g, x, y).norm_sqr();
        let want_twin = c(*a, *b) + c(*a, mb) + c(ma, *b) + c(ma, mb);
        let want_signal = c(*a, *b);
        // Mean twin intensities at both points set the noise level.
        let scale = (c(*a, *a).sqrt() + c(ma, ma).sqrt()) * (c(*b, *b).sqrt() + c(mb, mb).sqrt());
        assert!((t - want_twin).abs() < 0.04 * scale, "twin {a:?} {b:?}: {t} vs {want_twin}");
        assert!((s - want_signal).abs() < 0.04 * scale, "signal {a:?} {b:?}: {s} vs {want_signal}");
    }
    // Symmetric points: strongly correlated with the idler, near the
    // autocorrelation level without it.
    let a = (15, 13);
    let sym = [(a, mirror(a))];
    let t = sample_covariance(&twin, 24, &sym, n)[0];
    let s = sample_covariance(&signal, 24, &sym, n)[0];
    assert!(t > 3.0 * s.abs(), "{t} vs {s}");
}
