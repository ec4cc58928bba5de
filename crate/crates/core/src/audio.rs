//! Mono waveforms, WAV I/O, signal statistics and seeded noise injection.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};

/// Name of the generator used by [`add_white_noise`], echoed in sweep reports.
pub const NOISE_RNG: &str = "ChaCha8Rng (rand_chacha 0.9) with rand_distr::Normal";

/// A non-empty mono sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns the samples in `[start, end)` (clamped to the signal) as a new waveform.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.samples.len());
        if start >= end {
            return Err(Error::EmptyAudio);
        }
        Self::new(self.samples[start..end].to_vec(), self.sample_rate)
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Output encodings accepted by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Pcm16,
    #[default]
    Float32,
}

/// Reads a PCM or IEEE-float WAV file. Multi-channel audio is averaged to mono
/// and integer PCM is scaled by `2^(bits-1)` into `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedEncoding("zero channels".into()));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if spec.bits_per_sample == 0 || spec.bits_per_sample > 32 {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}-bit integer PCM",
                    spec.bits_per_sample
                )));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}-bit float",
                    spec.bits_per_sample
                )));
            }
            reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };

    if interleaved.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Waveform::new(mono, spec.sample_rate)
}

/// Writes a mono WAV file. Integer output clips to `[-1, 1]`; the number of
/// clipped samples is reported through `log::warn!`.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match depth {
            BitDepth::Pcm16 => 16,
            BitDepth::Float32 => 32,
        },
        sample_format: match depth {
            BitDepth::Pcm16 => hound::SampleFormat::Int,
            BitDepth::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    match depth {
        BitDepth::Pcm16 => {
            let mut clipped = 0usize;
            for &s in &w.samples {
                if s.abs() > 1.0 {
                    clipped += 1;
                }
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v).map_err(wav_err)?;
            }
            if clipped > 0 {
                log::warn!("{}: clipped {clipped} samples to [-1, 1]", path.display());
            }
        }
        BitDepth::Float32 => {
            for &s in &w.samples {
                writer.write_sample(s as f32).map_err(wav_err)?;
            }
        }
    }
    writer.finalize().map_err(wav_err)
}

/// Root-mean-square amplitude.
pub fn rms(w: &Waveform) -> f64 {
    rms_of(&w.samples)
}

pub(crate) fn rms_of(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// How an SNR figure is converted into a noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrDefinition {
    /// `rms(signal) / rms(noise)`.
    #[default]
    Amplitude,
    /// `rms(signal)^2 / rms(noise)^2`.
    Power,
}

impl SnrDefinition {
    /// Noise RMS giving the requested SNR against a signal of RMS `signal_rms`.
    pub fn noise_rms(self, signal_rms: f64, snr: f64) -> f64 {
        match self {
            SnrDefinition::Amplitude => signal_rms / snr,
            SnrDefinition::Power => signal_rms / snr.sqrt(),
        }
    }
}

impl std::str::FromStr for SnrDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "amplitude" | "amp" => Ok(Self::Amplitude),
            "power" => Ok(Self::Power),
            other => Err(invalid(format!("unknown SNR definition '{other}'"))),
        }
    }
}

impl std::fmt::Display for SnrDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SnrDefinition::Amplitude => "amplitude",
            SnrDefinition::Power => "power",
        })
    }
}

/// Adds zero-mean Gaussian white noise at an amplitude SNR.
pub fn add_white_noise(w: &Waveform, snr: f64, seed: u64) -> Result<Waveform> {
    add_noise(w, snr, SnrDefinition::Amplitude, seed)
}

/// Adds zero-mean Gaussian white noise whose standard deviation is chosen from
/// `snr` under the given definition. Deterministic for a fixed seed.
pub fn add_noise(w: &Waveform, snr: f64, definition: SnrDefinition, seed: u64) -> Result<Waveform> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(invalid(format!(
            "SNR must be positive and finite, got {snr}"
        )));
    }
    let sigma = definition.noise_rms(rms(w), snr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let samples = w
        .samples
        .iter()
        .map(|s| s + normal.sample(&mut rng))
        .collect();
    Waveform::new(samples, w.sample_rate)
}

/// Band-limited resampling with a Hann-windowed sinc kernel. When
/// downsampling, the cutoff sits at 95% of the new Nyquist frequency.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(invalid("target sample rate must be positive"));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let ratio = target_rate as f64 / w.sample_rate as f64;
    let cutoff = 0.95 * ratio.min(1.0);
    let half_width = (16.0 / cutoff).ceil();
    let out_len = ((w.len() as f64) * ratio).floor().max(1.0) as usize;
    let x = &w.samples;
    let n = x.len() as isize;

    let samples = (0..out_len)
        .map(|k| {
            let centre = k as f64 / ratio;
            let lo = ((centre - half_width).ceil() as isize).max(0);
            let hi = ((centre + half_width).floor() as isize).min(n - 1);
            (lo..=hi)
                .map(|m| {
                    let tau = centre - m as f64;
                    let arg = cutoff * tau;
                    let sinc = if arg.abs() < 1e-12 {
                        1.0
                    } else {
                        (PI * arg).sin() / (PI * arg)
                    };
                    let taper = 0.5 * (1.0 + (PI * tau / half_width).cos());
                    x[m as usize] * cutoff * sinc * taper
                })
                .sum()
        })
        .collect();
    Waveform::new(samples, target_rate)
}
