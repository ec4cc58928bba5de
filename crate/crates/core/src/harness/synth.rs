use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{rms_of, Waveform};
use crate::error::{invalid, Error, Result};

/// Glottal source waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseShape {
    /// Band-limited impulse train: every harmonic below Nyquist at equal level.
    #[default]
    ImpulseTrain,
    /// Rosenberg flow pulse (40% opening, 16% closing), differentiated.
    Rosenberg,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "impulse" | "impulse-train" => Ok(Self::ImpulseTrain),
            "rosenberg" => Ok(Self::Rosenberg),
            other => Err(invalid(format!("unknown pulse shape '{other}'"))),
        }
    }
}

impl std::fmt::Display for PulseShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ImpulseTrain => "impulse-train",
            Self::Rosenberg => "rosenberg",
        })
    }
}

/// Output RMS of every synthesised vowel.
pub const SYNTH_RMS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct VowelSpec {
    pub f0: f64,
    /// `(frequency, bandwidth)` pairs in Hz, ascending.
    pub formants: Vec<(f64, f64)>,
    pub duration: f64,
    pub sample_rate: u32,
    pub pulse_shape: PulseShape,
    /// Per-period random deviation of the period, as a fraction of it.
    pub jitter: f64,
}

impl Default for VowelSpec {
    fn default() -> Self {
        Self {
            f0: 120.0,
            formants: vec![
                (650.0, 80.0),
                (1230.0, 90.0),
                (2550.0, 120.0),
                (3600.0, 160.0),
                (4730.0, 200.0),
            ],
            duration: 0.5,
            sample_rate: 48_000,
            pulse_shape: PulseShape::ImpulseTrain,
            jitter: 0.0,
        }
    }
}

impl VowelSpec {
    pub fn formant_frequencies(&self) -> Vec<f64> {
        self.formants.iter().map(|f| f.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) || !self.f0.is_finite() {
            return Err(invalid(format!("f0 must be positive, got {}", self.f0)));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.f0 >= nyquist {
            return Err(invalid("f0 must be below Nyquist"));
        }
        let mut last = 0.0;
        for &(f, bw) in &self.formants {
            if !(f > last && f < nyquist) {
                return Err(invalid(format!(
                    "formants must be increasing and below Nyquist, got {f} Hz"
                )));
            }
            if !(bw > 0.0) {
                return Err(invalid(format!("bandwidth must be positive, got {bw} Hz")));
            }
            last = f;
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(invalid("jitter must be in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Source followed by cascaded two-pole resonators, scaled to RMS 0.2. The
/// seed only matters when `jitter > 0`.
pub fn synth_vowel(spec: &VowelSpec, seed: u64) -> Result<Waveform> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let len = ((spec.duration * fs).round() as usize).max(1);
    let periods = period_lengths(spec, len, seed);

    let mut y = match spec.pulse_shape {
        PulseShape::ImpulseTrain => blit(&periods, len, spec.f0, fs),
        PulseShape::Rosenberg => rosenberg(&periods, len),
    };
    for &(f, bw) in &spec.formants {
        resonate(&mut y, f, bw, fs);
    }
    let level = rms_of(&y);
    if !(level > 0.0) {
        return Err(invalid("synthesised signal is silent"));
    }
    let gain = SYNTH_RMS / level;
    y.iter_mut().for_each(|v| *v *= gain);
    Waveform::new(y, spec.sample_rate)
}

/// Period lengths in samples, covering at least `len` samples.
fn period_lengths(spec: &VowelSpec, len: usize, seed: u64) -> Vec<f64> {
    let nominal = spec.sample_rate as f64 / spec.f0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut total = 0.0;
    while total < len as f64 {
        let p = if spec.jitter > 0.0 {
            nominal * (1.0 + rng.random_range(-spec.jitter..spec.jitter))
        } else {
            nominal
        };
        out.push(p);
        total += p;
    }
    out
}

/// Sum of the harmonics below Nyquist with a phase that advances by one
/// cycle per period, evaluated through the closed-form Dirichlet kernel.
fn blit(periods: &[f64], len: usize, f0: f64, fs: f64) -> Vec<f64> {
    let harmonics = ((fs / 2.0 - 1e-9) / (f0 * (1.0 + 1e-9))).floor().max(1.0);
    let mut out = Vec::with_capacity(len);
    let mut cycle = 0;
    let mut start = 0.0;
    for n in 0..len {
        while cycle + 1 < periods.len() && n as f64 >= start + periods[cycle] {
            start += periods[cycle];
            cycle += 1;
        }
        let theta = 2.0 * PI * (n as f64 - start) / periods[cycle];
        let half = (0.5 * theta).sin();
        let v = if half.abs() < 1e-12 {
            harmonics
        } else {
            ((harmonics + 0.5) * theta).sin() / (2.0 * half) - 0.5
        };
        out.push(v / harmonics);
    }
    out
}

fn rosenberg(periods: &[f64], len: usize) -> Vec<f64> {
    let mut flow = vec![0.0; len];
    let mut start = 0.0f64;
    for &p in periods {
        let onset = start.round() as usize;
        let open = (0.4 * p).round().max(1.0) as usize;
        let close = (0.16 * p).round().max(1.0) as usize;
        for i in 0..open + close {
            let Some(slot) = flow.get_mut(onset + i) else {
                break;
            };
            *slot += if i < open {
                0.5 * (1.0 - (PI * i as f64 / open as f64).cos())
            } else {
                (PI * (i - open) as f64 / (2.0 * close as f64)).cos()
            };
        }
        start += p;
    }
    let mut prev = 0.0;
    flow.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect()
}

/// Two-pole resonator with unit gain at DC.
fn resonate(x: &mut [f64], freq: f64, bw: f64, fs: f64) {
    let t = 1.0 / fs;
    let c = -(-2.0 * PI * bw * t).exp();
    let b = 2.0 * (-PI * bw * t).exp() * (2.0 * PI * freq * t).cos();
    let a = 1.0 - b - c;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = a * *v + b * y1 + c * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    fn periodogram(x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
        buf[..x.len() / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    #[test]
    fn rms_is_normalised() {
        let w = synth_vowel(&VowelSpec::default(), 0).unwrap();
        assert!((rms(&w) - 0.2).abs() < 1e-12);
        assert_eq!(w.len(), 24_000);
    }

    #[test]
    fn harmonic_spectrum_without_formants() {
        let spec = VowelSpec {
            formants: vec![],
            ..VowelSpec::default()
        };
        let w = synth_vowel(&spec, 0).unwrap();
        let p = periodogram(w.samples());
        // 0.5 s at 48 kHz: bin spacing 2 Hz, harmonics every 60 bins.
        let peak = p.iter().copied().fold(0.0, f64::max);
        for (bin, v) in p.iter().enumerate() {
            if bin % 60 == 0 && bin > 0 {
                assert!(*v > 0.5 * peak, "harmonic bin {bin}");
            } else {
                assert!(*v < 1e-12 * peak, "bin {bin}");
            }
        }
    }

    #[test]
    fn resonator_gain_is_unity_at_dc() {
        let mut x = vec![1.0; 20_000];
        resonate(&mut x, 1000.0, 100.0, 48_000.0);
        assert!((x[19_999] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rosenberg_is_periodic() {
        let spec = VowelSpec {
            pulse_shape: PulseShape::Rosenberg,
            ..VowelSpec::default()
        };
        let w = synth_vowel(&spec, 0).unwrap();
        let s = w.samples();
        // After the resonators settle, one period (400 samples) repeats.
        for n in 12_000..12_400 {
            assert!((s[n] - s[n + 400]).abs() < 1e-6 * 0.2);
        }
    }

    #[test]
    fn jitter_is_seeded() {
        let spec = VowelSpec {
            jitter: 0.02,
            ..VowelSpec::default()
        };
        let a = synth_vowel(&spec, 1).unwrap();
        let b = synth_vowel(&spec, 1).unwrap();
        let c = synth_vowel(&spec, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            VowelSpec {
                f0: 0.0,
                ..VowelSpec::default()
            },
            VowelSpec {
                duration: -1.0,
                ..VowelSpec::default()
            },
            VowelSpec {
                formants: vec![(1000.0, 50.0), (900.0, 50.0)],
                ..VowelSpec::default()
            },
            VowelSpec {
                formants: vec![(30_000.0, 50.0)],
                ..VowelSpec::default()
            },
        ];
        for spec in bad {
            assert!(synth_vowel(&spec, 0).is_err());
        }
    }
}
