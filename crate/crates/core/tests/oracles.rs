use std::f64::consts::PI;

use napres::audio::{add_white_noise, rms};
use napres::formant::{histogram, histogram_in_band, FrequencyHistogram, Weighting};
use napres::harness::{synth_vowel, VowelSpec};
use napres::pulse::{estimate_f0, j_sweep, napres, NapresParams};
use napres::reassign::reassigned_cloud;
use napres::spectral::stft_triple;
use napres::{AnalysisParams, InputModel, PruneParams, Waveform};
use num_complex::Complex64;
use rustfft::FftPlanner;

fn tone(f: f64, rate: u32, len: usize) -> Waveform {
    let x = (0..len)
        .map(|n| (2.0 * PI * f * n as f64 / rate as f64).sin())
        .collect();
    Waveform::new(x, rate).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn off_bin_tone_concentrates() {
    let w = tone(1007.3, 48_000, 24_000);
    let s = stft_triple(&w, &AnalysisParams::default()).unwrap();
    let cloud = reassigned_cloud(&s, &PruneParams::default()).unwrap();
    let f: Vec<f64> = cloud.points.iter().map(|p| p.f_hz).collect();
    let near = f.iter().filter(|v| (*v - 1007.3).abs() <= 2.0).count();
    assert!(near as f64 >= 0.9 * f.len() as f64, "{near}/{}", f.len());
    assert!((median(f) - 1007.3).abs() <= 0.5);
}

#[test]
fn loud_tone_cells_are_exact_in_both_input_models() {
    // Within 20 dB of the peak the mirror image is negligible either way.
    for input in [InputModel::Analytic, InputModel::Real] {
        let w = tone(4007.3, 48_000, 24_000);
        let p = AnalysisParams::default().with_input(input);
        let s = stft_triple(&w, &p).unwrap();
        let cloud = reassigned_cloud(
            &s,
            &PruneParams {
                amp_threshold_db: -20.0,
                ..PruneParams::default()
            },
        )
        .unwrap();
        assert!(!cloud.is_empty());
        for pt in &cloud.points {
            assert!((pt.f_hz - 4007.3).abs() < 0.05, "{input}: {}", pt.f_hz);
        }
    }
}

#[test]
fn impulse_localises_in_time() {
    let mut x = vec![0.0; 24_000];
    x[9600] = 1.0;
    let w = Waveform::new(x, 48_000).unwrap();
    let s = stft_triple(&w, &AnalysisParams::default()).unwrap();
    let cloud = reassigned_cloud(&s, &PruneParams::default()).unwrap();
    assert!(cloud.len() > 100);
    let near = cloud
        .points
        .iter()
        .filter(|p| (p.t_sec - 0.2).abs() <= 2.5e-4)
        .count();
    assert!(
        near as f64 >= 0.9 * cloud.len() as f64,
        "{near}/{}",
        cloud.len()
    );
}

#[test]
fn chirp_stays_on_its_track() {
    // Linear chirp 500 -> 3500 Hz over 0.5 s; reassigned points follow f(t).
    let rate = 48_000.0;
    let (f_start, slope) = (500.0, 6000.0);
    let x: Vec<f64> = (0..24_000)
        .map(|n| {
            let t = n as f64 / rate;
            (2.0 * PI * (f_start * t + 0.5 * slope * t * t)).sin()
        })
        .collect();
    let w = Waveform::new(x, 48_000).unwrap();
    let s = stft_triple(&w, &AnalysisParams::new(1024, 128, 1024).unwrap()).unwrap();
    let cloud = reassigned_cloud(
        &s,
        &PruneParams {
            amp_threshold_db: -40.0,
            ..PruneParams::default()
        },
    )
    .unwrap();
    let near = cloud
        .points
        .iter()
        .filter(|p| (p.f_hz - (f_start + slope * p.t_sec)).abs() <= 20.0)
        .count();
    assert!(
        near as f64 >= 0.9 * cloud.len() as f64,
        "{near}/{}",
        cloud.len()
    );
}

fn periodogram(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf[..x.len() / 2].iter().map(|c| c.norm_sqr()).collect()
}

#[test]
fn synth_spectrum_peaks_at_formants() {
    // A low f0 samples the envelope densely enough to resolve every peak.
    let spec = VowelSpec {
        f0: 20.0,
        duration: 1.0,
        ..VowelSpec::default()
    };
    let w = synth_vowel(&spec, 0).unwrap();
    let p = periodogram(w.samples());
    let hz_per_bin = 48_000.0 / w.len() as f64;
    for f in spec.formant_frequencies() {
        let lo = (0.9 * f / hz_per_bin) as usize;
        let hi = (1.1 * f / hz_per_bin) as usize;
        let peak = (lo..=hi).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let found = peak as f64 * hz_per_bin;
        assert!(
            (found / f - 1.0).abs() < 0.02,
            "formant {f}: peak at {found}"
        );
        assert!(peak > lo && peak < hi, "formant {f}: no interior peak");
    }
}

#[test]
fn synth_pitch_and_level() {
    let w = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let f0 = estimate_f0(&w, (60.0, 400.0)).unwrap();
    assert!((f0 - 120.0).abs() <= 1.0, "f0 {f0}");
    assert!((rms(&w) - 0.2).abs() < 1e-12);
}

fn local_peak_near(h: &FrequencyHistogram, f: f64, tol: f64) -> bool {
    let centers = h.centers();
    let idx: Vec<usize> = (0..centers.len())
        .filter(|&i| (centers[i] / f - 1.0).abs() <= tol)
        .collect();
    let (first, last) = (idx[0], *idx.last().unwrap());
    let best = idx
        .iter()
        .copied()
        .max_by(|&a, &b| h.counts[a].total_cmp(&h.counts[b]))
        .unwrap();
    best > first
        && best < last
        && h.counts[best] > h.counts[first]
        && h.counts[best] > h.counts[last]
}

#[test]
fn vowel_cloud_histogram_peaks_at_formants() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let w = add_white_noise(&clean, 100.0, 3).unwrap();
    let out = napres(&w, &NapresParams::default()).unwrap();
    assert!(out.alignment.j >= 50, "J = {}", out.alignment.j);
    let h = histogram(&out.cloud, 20.0, Weighting::Count).unwrap();
    for f in VowelSpec::default().formant_frequencies() {
        assert!(
            local_peak_near(&h, f, 0.05),
            "no histogram peak near {f} Hz"
        );
    }
}

#[test]
fn sinusoid_through_pipeline() {
    let w = tone(480.0, 48_000, 24_000);
    let params = NapresParams::default();
    let out = napres(&w, &params).unwrap();
    // Every template-length window matches: J = floor(frames / W).
    let frames = params.analysis.frame_count(w.len());
    assert_eq!(out.alignment.j, frames / out.alignment.width_w);
    let loud: Vec<_> = out
        .cloud
        .points
        .iter()
        .filter(|p| p.mag_db >= -40.0)
        .collect();
    let near = loud
        .iter()
        .filter(|p| (p.f_hz / 480.0 - 1.0).abs() < 0.02)
        .count();
    assert!(
        near as f64 >= 0.9 * loud.len() as f64,
        "{near}/{}",
        loud.len()
    );
    let h = histogram(&out.cloud, 20.0, Weighting::Count).unwrap();
    let mode = (0..h.len())
        .max_by(|&a, &b| h.counts[a].total_cmp(&h.counts[b]))
        .unwrap();
    assert!((h.centers()[mode] - 480.0).abs() <= 20.0);
}

/// Earth mover's distance between two normalised histograms on the same bins.
fn emd(a: &FrequencyHistogram, b: &FrequencyHistogram) -> f64 {
    let (sa, sb) = (a.counts.iter().sum::<f64>(), b.counts.iter().sum::<f64>());
    let mut cdf = 0.0;
    let mut total = 0.0;
    for (x, y) in a.counts.iter().zip(&b.counts) {
        cdf += x / sa - y / sb;
        total += cdf.abs();
    }
    total * a.bin_width()
}

#[test]
fn more_pulses_move_the_cloud_towards_the_clean_one() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let params = NapresParams::default();
    let reference = napres(&clean, &params).unwrap();
    let bins = |pts: &[napres::reassign::CloudPoint]| {
        histogram_in_band(pts, 100.0, 10_000.0, 20.0, Weighting::Magnitude).unwrap()
    };
    let ref_h = bins(&reference.cloud.points);
    let noisy = add_white_noise(&clean, 5.0, 11).unwrap();
    let runs = j_sweep(&noisy, &params, &[5, 40]).unwrap();
    assert_eq!(runs[0].alignment.j, 5);
    assert_eq!(runs[1].alignment.j, 40);
    let d5 = emd(&bins(&runs[0].cloud.points), &ref_h);
    let d40 = emd(&bins(&runs[1].cloud.points), &ref_h);
    assert!(d40 < d5, "EMD J=5 {d5}, J=40 {d40}");
}

#[test]
fn pipeline_is_deterministic() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let w = add_white_noise(&clean, 5.0, 1).unwrap();
    let a = napres(&w, &NapresParams::default()).unwrap();
    let b = napres(&w, &NapresParams::default()).unwrap();
    assert_eq!(
        napres::io::cloud_csv(&a.cloud),
        napres::io::cloud_csv(&b.cloud)
    );
}
