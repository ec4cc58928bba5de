//! Pulse alignment and non-local averaging.
//!
//! The first `width_w` frames of the cropped utterance are the template. Its
//! stacked magnitude frames are correlated against every frame shift, the
//! local maxima of that correlation mark pulse onsets, and the aligned
//! slices are averaged (complex-valued, so phase survives for reassignment)
//! before reassignment and pruning.

use num_complex::Complex64;

use crate::audio::Waveform;
use crate::error::{invalid, Error, Result};
use crate::reassign::{prune, reassign_raw, PruneParams, ReassignedPointCloud};
use crate::spectral::{
    self, stft_magnitude, stft_triple, AnalysisParams, ComplexGrid, InputModel, MagnitudeGrid,
    SpectrogramTriple,
};

/// Where the aligned slices are averaged. Both give the same triple when the
/// pulse onsets are whole frames apart, which they always are here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AveragingDomain {
    /// Average the time-domain slices, then take one STFT of the mean slice.
    #[default]
    Temporal,
    /// Take the full three-window STFT, then average complex frame slices.
    Spectral,
}

impl std::str::FromStr for AveragingDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "temporal" | "time" => Ok(Self::Temporal),
            "spectral" | "complex" => Ok(Self::Spectral),
            other => Err(invalid(format!("unknown averaging domain '{other}'"))),
        }
    }
}

impl std::fmt::Display for AveragingDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Temporal => "temporal",
            Self::Spectral => "spectral",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NapresParams {
    pub f0_hz: f64,
    pub pulses_per_template: usize,
    /// Average at most this many pulses (template included).
    pub max_j: Option<usize>,
    pub analysis: AnalysisParams,
    pub prune: PruneParams,
    pub averaging: AveragingDomain,
    /// Minimum peak spacing as a fraction of the template width.
    pub min_separation_factor: f64,
}

impl NapresParams {
    /// Analysis geometry that resolves individual glottal pulses at 48 kHz:
    /// a 256-sample window, 4-sample hop and 2048-point transform.
    pub const PULSE_ANALYSIS: AnalysisParams = AnalysisParams {
        window_len: 256,
        hop: 4,
        fft_len: 2048,
        input: InputModel::Analytic,
    };

    pub fn with_f0(f0_hz: f64) -> Self {
        Self {
            f0_hz,
            pulses_per_template: 1,
            max_j: None,
            analysis: Self::PULSE_ANALYSIS,
            prune: PruneParams::default(),
            averaging: AveragingDomain::default(),
            min_separation_factor: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0_hz > 0.0) || !self.f0_hz.is_finite() {
            return Err(invalid(format!("f0 must be positive, got {}", self.f0_hz)));
        }
        if self.pulses_per_template == 0 {
            return Err(invalid("pulses per template must be at least 1"));
        }
        if self.max_j == Some(0) {
            return Err(invalid("max J must be at least 1"));
        }
        if !(self.min_separation_factor > 0.0) {
            return Err(invalid("minimum separation factor must be positive"));
        }
        self.analysis.validate()?;
        self.prune.validate()
    }
}

impl Default for NapresParams {
    fn default() -> Self {
        Self::with_f0(120.0)
    }
}

/// Where the template was taken and which pulses were averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseAlignment {
    pub template_start: usize,
    pub width_w: usize,
    /// `p[i]` for every shift `i`, normalised so `p[template_start] = 1`.
    pub correlation: Vec<f64>,
    /// Onset frames of the averaged pulses, ascending.
    pub peaks: Vec<usize>,
    pub j: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub f0_hz: f64,
}

impl PulseAlignment {
    pub fn peak_time(&self, frame: usize) -> f64 {
        (frame * self.hop) as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NapresOutput {
    pub cloud: ReassignedPointCloud,
    pub alignment: PulseAlignment,
    /// The averaged one-template triple that was reassigned.
    pub averaged: SpectrogramTriple,
    /// Set when only one pulse was found, so nothing was averaged.
    pub single_pulse: bool,
}

/// Autocorrelation pitch estimate restricted to `band` (Hz).
///
/// Picks the shortest lag whose normalised autocorrelation is a local maximum
/// within 90% of the best one, then refines it by parabolic interpolation.
pub fn estimate_f0(w: &Waveform, band: (f64, f64)) -> Result<f64> {
    let (lo, hi) = band;
    if !(lo > 0.0 && lo < hi) {
        return Err(invalid(format!("invalid pitch band [{lo}, {hi}]")));
    }
    let fs = w.sample_rate() as f64;
    let mean = w.samples().iter().sum::<f64>() / w.len() as f64;
    let x: Vec<f64> = w.samples().iter().map(|s| s - mean).collect();

    let min_lag = ((fs / hi).floor() as usize).max(2);
    let max_lag = ((fs / lo).ceil() as usize).min(x.len() / 3);
    if max_lag <= min_lag + 1 {
        return Err(Error::SignalTooShort {
            needed: 3 * (fs / lo).ceil() as usize,
            got: x.len(),
        });
    }

    // Prefix energies let each lag's normalisation run in O(1).
    let mut energy = vec![0.0; x.len() + 1];
    for (i, s) in x.iter().enumerate() {
        energy[i + 1] = energy[i] + s * s;
    }
    let corr: Vec<f64> = (min_lag - 1..=max_lag + 1)
        .map(|lag| {
            let n = x.len() - lag;
            let dot: f64 = x[..n].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
            let norm = (energy[n] * (energy[x.len()] - energy[lag])).sqrt();
            if norm > 0.0 {
                dot / norm
            } else {
                0.0
            }
        })
        .collect();

    let maxima: Vec<usize> = (1..corr.len() - 1)
        .filter(|&i| corr[i - 1] < corr[i] && corr[i] >= corr[i + 1])
        .collect();
    let best = maxima
        .iter()
        .map(|&i| corr[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best >= 0.3) {
        return Err(Error::Unvoiced);
    }
    let i = *maxima
        .iter()
        .find(|&&i| corr[i] >= 0.9 * best)
        .expect("best maximum qualifies");
    let (a, b, c) = (corr[i - 1], corr[i], corr[i + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-15 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (min_lag - 1 + i) as f64 + offset;
    Ok(fs / lag)
}

/// Template width in frames, `round(pulses · fs / (f0 · hop))`, at least 1.
pub fn template_width(
    f0_hz: f64,
    pulses_per_template: usize,
    p: &AnalysisParams,
    sample_rate: u32,
) -> usize {
    let frames = pulses_per_template as f64 * sample_rate as f64 / (f0_hz * p.hop as f64);
    (frames.round() as usize).max(1)
}

/// Inner product of the template's stacked magnitude frames with the frames
/// at every shift `i` in `0..=frames - width_w`, normalised to 1 at the
/// template itself.
pub fn match_template(
    s: &SpectrogramTriple,
    template_start: usize,
    width_w: usize,
) -> Result<Vec<f64>> {
    match_magnitudes(&s.magnitudes(), template_start, width_w)
}

pub fn match_magnitudes(
    mags: &MagnitudeGrid,
    template_start: usize,
    width_w: usize,
) -> Result<Vec<f64>> {
    let frames = mags.frames();
    if width_w == 0 || template_start + width_w > frames {
        return Err(Error::TemplateOutOfRange {
            start: template_start,
            end: template_start + width_w,
            frames,
        });
    }
    let template = mags.frame_block(template_start, width_w);
    let mut p: Vec<f64> = (0..=frames - width_w)
        .map(|i| dot(template, mags.frame_block(i, width_w)))
        .collect();
    let norm = p[template_start];
    if !(norm > 0.0) {
        return Err(invalid("template region has no energy"));
    }
    for v in &mut p {
        *v /= norm;
    }
    Ok(p)
}

/// Inner product with eight independent partial sums so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Indices with `p[i-1] < p[i] >= p[i+1]` (endpoints never qualify), thinned
/// greedily so that kept peaks are at least `min_separation` apart, higher
/// peaks first. `anchor`, when given, is always kept.
pub fn find_peaks(p: &[f64], min_separation: usize, anchor: Option<usize>) -> Result<Vec<usize>> {
    if let Some(a) = anchor {
        if a >= p.len() {
            return Err(invalid(format!(
                "anchor {a} outside correlation of length {}",
                p.len()
            )));
        }
    }
    let mut candidates: Vec<usize> = if p.len() >= 3 {
        (1..p.len() - 1)
            .filter(|&i| p[i - 1] < p[i] && p[i] >= p[i + 1])
            .collect()
    } else {
        Vec::new()
    };
    candidates.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = anchor.into_iter().collect();
    for i in candidates {
        if kept.iter().all(|&k| k.abs_diff(i) >= min_separation) {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoPulses);
    }
    kept.sort_unstable();
    Ok(kept)
}

fn usable_peaks(
    peaks: &[usize],
    width_w: usize,
    frames: usize,
    max_j: Option<usize>,
) -> Vec<usize> {
    peaks
        .iter()
        .copied()
        .filter(|&pk| pk + width_w <= frames)
        .take(max_j.unwrap_or(usize::MAX))
        .collect()
}

/// Complex mean of the `width_w`-frame slices of all three grids starting at
/// each peak. Slices running past the end are dropped; `max_j` keeps only
/// the first peaks.
pub fn average_slices(
    s: &SpectrogramTriple,
    peaks: &[usize],
    width_w: usize,
    max_j: Option<usize>,
) -> Result<SpectrogramTriple> {
    let used = usable_peaks(peaks, width_w, s.frames(), max_j);
    if used.is_empty() || width_w == 0 {
        return Err(Error::NoSlices);
    }
    let bins = s.bins();
    let scale = 1.0 / used.len() as f64;
    let mean = |grid: &ComplexGrid| {
        let mut out = ComplexGrid::zeros(width_w, bins);
        for &pk in &used {
            for n in 0..width_w {
                for (acc, v) in out.row_mut(n).iter_mut().zip(grid.row(pk + n)) {
                    *acc += v;
                }
            }
        }
        for n in 0..width_w {
            for v in out.row_mut(n) {
                *v *= scale;
            }
        }
        out
    };

    Ok(SpectrogramTriple {
        plain: mean(&s.plain),
        deriv: mean(&s.deriv),
        ramped: mean(&s.ramped),
        frame_times: spectral::frame_times(&s.params, width_w, s.sample_rate),
        bin_freqs: s.bin_freqs.clone(),
        params: s.params,
        sample_rate: s.sample_rate,
        signal_len: s.params.span(width_w),
        averaged_slices: used.len(),
    })
}

/// Time-domain counterpart of [`average_slices`]: averages the input signal
/// under each slice and returns the three STFTs of the mean slice. Up to
/// rounding this equals [`average_slices`] on the full triple.
pub fn average_time_slices(
    w: &Waveform,
    p: &AnalysisParams,
    peaks: &[usize],
    width_w: usize,
    max_j: Option<usize>,
) -> Result<SpectrogramTriple> {
    let used = usable_peaks(peaks, width_w, p.frame_count(w.len()), max_j);
    if used.is_empty() || width_w == 0 {
        return Err(Error::NoSlices);
    }
    let span = p.span(width_w);
    let signal = spectral::input_signal(w.samples(), p);
    let mut mean = vec![Complex64::new(0.0, 0.0); span];
    for &pk in &used {
        let start = pk * p.hop;
        for (acc, v) in mean.iter_mut().zip(&signal[start..start + span]) {
            *acc += v;
        }
    }
    let scale = 1.0 / used.len() as f64;
    for v in &mut mean {
        *v *= scale;
    }
    let mut triple = spectral::stft_triple_of(&mean, w.sample_rate(), p)?;
    triple.averaged_slices = used.len();
    Ok(triple)
}

/// The matching stage of the pipeline, reusable across several `max_j` caps.
struct Matched {
    width_w: usize,
    correlation: Vec<f64>,
    peaks: Vec<usize>,
    full: Option<SpectrogramTriple>,
}

fn match_pulses(w: &Waveform, params: &NapresParams) -> Result<Matched> {
    params.validate()?;
    let fs = w.sample_rate();
    let p = &params.analysis;
    let width_w = template_width(params.f0_hz, params.pulses_per_template, p, fs);

    let (mags, full) = match params.averaging {
        AveragingDomain::Temporal => {
            // Zero-padding only interpolates between bins, so matching runs on
            // the unpadded transform.
            let unpadded = AnalysisParams {
                fft_len: p.window_len,
                ..*p
            };
            (stft_magnitude(w, &unpadded)?, None)
        }
        AveragingDomain::Spectral => {
            let triple = stft_triple(w, p)?;
            (triple.magnitudes(), Some(triple))
        }
    };
    let correlation = match_magnitudes(&mags, 0, width_w)?;

    let expected = params.pulses_per_template as f64 * fs as f64 / (params.f0_hz * p.hop as f64);
    let min_separation = ((params.min_separation_factor * expected).round() as usize).max(1);
    let peaks = find_peaks(&correlation, min_separation, Some(0))?;
    Ok(Matched {
        width_w,
        correlation,
        peaks,
        full,
    })
}

fn finish(
    w: &Waveform,
    params: &NapresParams,
    m: &Matched,
    max_j: Option<usize>,
) -> Result<NapresOutput> {
    let p = &params.analysis;
    let averaged = match &m.full {
        Some(full) => average_slices(full, &m.peaks, m.width_w, max_j)?,
        None => average_time_slices(w, p, &m.peaks, m.width_w, max_j)?,
    };
    let j = averaged.averaged_slices;
    let peaks = usable_peaks(&m.peaks, m.width_w, p.frame_count(w.len()), max_j);
    let single_pulse = j < 2;
    if single_pulse {
        log::warn!("only one pulse found; the output is an unaveraged reassigned spectrogram");
    }
    let cloud = prune(&reassign_raw(&averaged), &params.prune, averaged.duration());

    Ok(NapresOutput {
        cloud,
        alignment: PulseAlignment {
            template_start: 0,
            width_w: m.width_w,
            correlation: m.correlation.clone(),
            peaks,
            j,
            hop: p.hop,
            sample_rate: w.sample_rate(),
            f0_hz: params.f0_hz,
        },
        averaged,
        single_pulse,
    })
}

/// Runs the full pipeline on a cropped utterance: STFT, template matching,
/// peak picking, slice averaging, reassignment and pruning.
pub fn napres(w: &Waveform, params: &NapresParams) -> Result<NapresOutput> {
    let matched = match_pulses(w, params)?;
    finish(w, params, &matched, params.max_j)
}

/// Runs the pipeline once per pulse cap in `caps`, sharing the matching stage.
pub fn j_sweep(w: &Waveform, params: &NapresParams, caps: &[usize]) -> Result<Vec<NapresOutput>> {
    if caps.contains(&0) {
        return Err(invalid("pulse caps must be at least 1"));
    }
    let matched = match_pulses(w, params)?;
    caps.iter()
        .map(|&cap| finish(w, params, &matched, Some(cap)))
        .collect()
}
