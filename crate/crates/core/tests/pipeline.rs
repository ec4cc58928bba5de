use std::f64::consts::PI;

use napres::formant::{lpc_formants, lpc_track, stride_for_count, track_mean, LpcParams, Method};
use napres::harness::{
    cell_stats, estimate_formants, long_csv, run_sweep, summary_csv, synth_vowel, SweepConfig,
    VowelSpec,
};
use napres::Waveform;

/// Impulse train through cascaded two-pole sections with the given poles.
fn all_pole(poles: &[(f64, f64)], rate: f64, len: usize, period: usize) -> Waveform {
    let mut x: Vec<f64> = (0..len)
        .map(|n| if n % period == 0 { 1.0 } else { 0.0 })
        .collect();
    for &(f, bw) in poles {
        let r = (-PI * bw / rate).exp();
        let a1 = 2.0 * r * (2.0 * PI * f / rate).cos();
        let a2 = -r * r;
        let (mut y1, mut y2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = *v + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
    Waveform::new(x, rate as u32).unwrap()
}

const POLES: [(f64, f64); 3] = [(650.0, 80.0), (1230.0, 90.0), (2550.0, 120.0)];

fn matched() -> LpcParams {
    LpcParams {
        order: 2 * POLES.len(),
        pre_emphasis: 0.0,
        sample_rate: Some(11_000),
        ..LpcParams::default()
    }
}

#[test]
fn lpc_recovers_known_poles() {
    let w = all_pole(&POLES, 11_000.0, 5500, 92);
    let r = lpc_formants(&w, &matched(), 0.1, 3).unwrap();
    for (i, &(f, _)) in POLES.iter().enumerate() {
        let got = r.get(i).expect("formant found");
        assert!((got / f - 1.0).abs() < 0.02, "F{}: {got} vs {f}", i + 1);
    }
}

#[test]
fn lpc_track_has_requested_length_and_is_stable() {
    let w = all_pole(&POLES, 11_000.0, 5500, 92);
    let p = matched();
    let stride = stride_for_count(w.duration(), p.window_ms * 1e-3, 67);
    let track = lpc_track(&w, &p, 3, 0.0, stride).unwrap();
    assert_eq!(track.len(), 67);
    for i in 0..3 {
        let values: Vec<Option<f64>> = track.iter().map(|r| r.get(i)).collect();
        let s = cell_stats(&values);
        let (mean, std) = (s.mean.unwrap(), s.std.unwrap());
        assert!(std <= 0.02 * mean, "F{}: std {std} mean {mean}", i + 1);
    }
    let avg = track_mean(&track, 3);
    assert_eq!(avg.failures(), 0);
}

#[test]
fn stride_equal_to_duration_gives_one_report() {
    let w = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let track = lpc_track(&w, &LpcParams::default(), 5, 0.0, w.duration()).unwrap();
    assert_eq!(track.len(), 1);
}

#[test]
fn lpc_on_white_noise_reports_failures_not_values() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let normal = Normal::new(0.0, 0.2).unwrap();
    let x: Vec<f64> = (0..24_000).map(|_| normal.sample(&mut rng)).collect();
    let w = Waveform::new(x, 48_000).unwrap();
    let stride = stride_for_count(w.duration(), 0.025, 67);
    let track = lpc_track(&w, &LpcParams::default(), 5, 0.0, stride).unwrap();
    let failures: usize = track.iter().map(|r| r.failures()).sum();
    assert!(
        failures > track.len(),
        "only {failures} failed formants over {} frames",
        track.len()
    );
    for r in &track {
        let values: Vec<f64> = r.formants.iter().flatten().copied().collect();
        assert!(values.windows(2).all(|v| v[1] > v[0]));
    }
}

fn small_config() -> SweepConfig {
    SweepConfig {
        snr_levels: vec![100.0, 2.0],
        replicas: 2,
        seed: 42,
        ..SweepConfig::default()
    }
}

#[test]
fn sweep_is_deterministic_and_accounted() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let cfg = small_config();
    let a = run_sweep(&clean, &cfg).unwrap();
    let b = run_sweep(&clean, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(summary_csv(&a), summary_csv(&b));
    assert_eq!(long_csv(&a), long_csv(&b));
    for r in &a.results {
        assert_eq!(r.reports.len(), 2);
        for (si, cell) in r.reports.iter().enumerate() {
            assert_eq!(cell.len(), 2);
            for f in 0..cfg.k {
                let s = cell_stats(&a.values(r.method, si, f));
                assert_eq!(s.failures + s.successes, cfg.replicas);
            }
        }
    }
    let other = run_sweep(&clean, &SweepConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn vanishing_noise_matches_clean_estimates() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let cfg = SweepConfig {
        snr_levels: vec![1e12],
        replicas: 1,
        ..SweepConfig::default()
    };
    let report = run_sweep(&clean, &cfg).unwrap();
    for method in Method::ALL {
        let reference = estimate_formants(
            &clean,
            method,
            &cfg,
            napres::harness::replica_seed(cfg.seed, 0, 0),
        );
        let got = &report.method(method).unwrap().reports[0][0];
        for f in 0..cfg.k {
            match (reference.get(f), got.get(f)) {
                (Some(a), Some(b)) => assert!(
                    (a / b - 1.0).abs() < 0.005,
                    "{method} F{}: {a} vs {b}",
                    f + 1
                ),
                (None, None) => {}
                (a, b) => panic!("{method} F{}: clean {a:?}, sweep {b:?}", f + 1),
            }
        }
    }
}

#[test]
fn clean_vowel_estimates() {
    let clean = synth_vowel(&VowelSpec::default(), 0).unwrap();
    let cfg = SweepConfig::default();
    let truth = VowelSpec::default().formant_frequencies();
    let gmm = estimate_formants(&clean, Method::NapresGmm, &cfg, 0);
    for (i, f) in truth.iter().enumerate().take(4) {
        let got = gmm.get(i).expect("formant found");
        assert!((got / f - 1.0).abs() < 0.05, "F{}: {got}", i + 1);
    }
    // The LPC baseline at 11 kHz cannot place a fifth formant at 4.73 kHz.
    let lpc = estimate_formants(&clean, Method::Lpc, &cfg, 0);
    assert!(lpc.get(4).is_none());
}
