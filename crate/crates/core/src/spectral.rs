//! Analysis windows and the three aligned STFTs used by reassignment.
//!
//! Every frame is transformed with three windows that share one support:
//! the Hann window `h`, its time-ramped version `t·h` (time measured in
//! samples from the window centre) and its analytic derivative `dh/dn`
//! (per sample). Phase is referenced to the first sample of each frame.
//!
//! By default the frames are taken from the analytic signal (the input with
//! its negative-frequency half removed), so a real component is not disturbed
//! by leakage from its own mirror image. [`InputModel::Real`] transforms the
//! samples as they are. Either way only bins `0..=fft_len/2` are kept.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::Waveform;
use crate::error::{invalid, Error, Result};

/// Which signal the frames are cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputModel {
    /// The analytic signal `x + j·H{x}`.
    #[default]
    Analytic,
    /// The real samples.
    Real,
}

impl std::str::FromStr for InputModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(Self::Analytic),
            "real" => Ok(Self::Real),
            other => Err(invalid(format!("unknown input model '{other}'"))),
        }
    }
}

impl std::fmt::Display for InputModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::Real => "real",
        })
    }
}

/// STFT geometry, all in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisParams {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub input: InputModel,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            window_len: 2048,
            hop: 256,
            fft_len: 2048,
            input: InputModel::Analytic,
        }
    }
}

impl AnalysisParams {
    pub fn new(window_len: usize, hop: usize, fft_len: usize) -> Result<Self> {
        let p = Self {
            window_len,
            hop,
            fft_len,
            input: InputModel::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_input(self, input: InputModel) -> Self {
        Self { input, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(invalid(format!(
                "window length must be at least 2, got {}",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(invalid(format!(
                "hop must be in 1..={}, got {}",
                self.window_len, self.hop
            )));
        }
        if self.fft_len < self.window_len {
            return Err(invalid(format!(
                "FFT length {} shorter than window {}",
                self.fft_len, self.window_len
            )));
        }
        Ok(())
    }

    /// One-sided bin count, `fft_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of complete frames in a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    /// Number of samples spanned by `frames` consecutive frames.
    pub fn span(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_len
        }
    }
}

/// The Hann window with its time-ramped and derivative companions.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTriple {
    /// `0.5 (1 - cos(2πn/(w-1)))`
    pub h: Vec<f64>,
    /// `(n - (w-1)/2) · h[n]`, in samples.
    pub th: Vec<f64>,
    /// `dh/dn`, per sample.
    pub dh: Vec<f64>,
}

pub fn make_windows(p: &AnalysisParams) -> Result<WindowTriple> {
    let w = p.window_len;
    if w < 2 {
        return Err(invalid(format!(
            "window length must be at least 2, got {w}"
        )));
    }
    let m = (w - 1) as f64;
    let centre = m / 2.0;
    let mut h = Vec::with_capacity(w);
    let mut th = Vec::with_capacity(w);
    let mut dh = Vec::with_capacity(w);
    for n in 0..w {
        let phase = 2.0 * PI * n as f64 / m;
        let hn = 0.5 * (1.0 - phase.cos());
        h.push(hn);
        th.push((n as f64 - centre) * hn);
        dh.push(0.5 * (2.0 * PI / m) * phase.sin());
    }
    Ok(WindowTriple { h, th, dh })
}

/// Row-major `frames × bins` grid of complex values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            data: vec![Complex64::new(0.0, 0.0); frames * bins],
        }
    }

    pub fn from_vec(frames: usize, bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(invalid(format!(
                "grid data has {} cells, expected {frames}x{bins}",
                data.len()
            )));
        }
        Ok(Self { frames, bins, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn row(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn row_mut(&mut self, frame: usize) -> &mut [Complex64] {
        &mut self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Row-major `frames × bins` grid of STFT magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeGrid {
    frames: usize,
    bins: usize,
    data: Vec<f64>,
}

impl MagnitudeGrid {
    pub fn from_vec(frames: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(invalid(format!(
                "grid data has {} cells, expected {frames}x{bins}",
                data.len()
            )));
        }
        Ok(Self { frames, bins, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    /// The contiguous cells of frames `[start, start + count)`.
    pub fn frame_block(&self, start: usize, count: usize) -> &[f64] {
        &self.data[start * self.bins..(start + count) * self.bins]
    }
}

/// Plain, derivative-window and ramped-window STFTs of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramTriple {
    /// STFT with `h`.
    pub plain: ComplexGrid,
    /// STFT with `dh`.
    pub deriv: ComplexGrid,
    /// STFT with `th`.
    pub ramped: ComplexGrid,
    /// Window centre of each frame, seconds from the first sample.
    pub frame_times: Vec<f64>,
    pub bin_freqs: Vec<f64>,
    pub params: AnalysisParams,
    pub sample_rate: u32,
    /// Length in samples of the signal the frames were taken from.
    pub signal_len: usize,
    /// Number of aligned slices averaged into this triple (1 for a plain STFT).
    pub averaged_slices: usize,
}

impl SpectrogramTriple {
    pub fn frames(&self) -> usize {
        self.plain.frames()
    }

    pub fn bins(&self) -> usize {
        self.plain.bins()
    }

    /// Duration of the analysed signal in seconds.
    pub fn duration(&self) -> f64 {
        self.signal_len as f64 / self.sample_rate as f64
    }

    pub fn magnitudes(&self) -> MagnitudeGrid {
        MagnitudeGrid {
            frames: self.frames(),
            bins: self.bins(),
            data: self.plain.as_slice().iter().map(|c| c.norm()).collect(),
        }
    }
}

/// Frame-centre times: `(k·hop + (w-1)/2) / sample_rate`.
pub fn frame_times(p: &AnalysisParams, frames: usize, sample_rate: u32) -> Vec<f64> {
    let centre = (p.window_len - 1) as f64 / 2.0;
    (0..frames)
        .map(|k| ((k * p.hop) as f64 + centre) / sample_rate as f64)
        .collect()
}

pub fn bin_freqs(p: &AnalysisParams, sample_rate: u32) -> Vec<f64> {
    (0..p.bins())
        .map(|b| b as f64 * sample_rate as f64 / p.fft_len as f64)
        .collect()
}

struct FrameTransform {
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    bins: usize,
}

impl FrameTransform {
    fn new(p: &AnalysisParams) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(p.fft_len);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            fft,
            buffer: vec![Complex64::new(0.0, 0.0); p.fft_len],
            scratch,
            bins: p.bins(),
        }
    }

    /// Bins `0..=fft_len/2` of the FFT of `segment · window`, zero-padded to
    /// the FFT length.
    fn run(&mut self, segment: &[Complex64], window: &[f64], out: &mut [Complex64]) {
        for (slot, (x, w)) in self.buffer.iter_mut().zip(segment.iter().zip(window)) {
            *slot = x * w;
        }
        for slot in &mut self.buffer[segment.len()..] {
            *slot = Complex64::new(0.0, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        out.copy_from_slice(&self.buffer[..self.bins]);
    }
}

fn check_length(len: usize, p: &AnalysisParams) -> Result<()> {
    if len < p.window_len {
        return Err(Error::SignalTooShort {
            needed: p.window_len,
            got: len,
        });
    }
    Ok(())
}

/// The analytic signal of `samples`: the FFT over a zero-padded buffer (at
/// least twice the length, so the circular Hilbert kernel does not wrap),
/// negative frequencies zeroed, positive ones doubled, inverse FFT.
pub fn analytic_signal(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = samples
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    planner.plan_fft_forward(size).process(&mut buf);
    let half = size / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || k == half {
            1.0
        } else if k < half {
            2.0
        } else {
            0.0
        };
        *v *= gain / size as f64;
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.truncate(n);
    buf
}

/// The samples the frames are cut from under `p.input`.
pub fn input_signal(samples: &[f64], p: &AnalysisParams) -> Vec<Complex64> {
    match p.input {
        InputModel::Analytic => analytic_signal(samples),
        InputModel::Real => samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
    }
}

/// Computes the three STFTs of `w`. Frames start every `hop` samples and the
/// incomplete tail frame is dropped.
pub fn stft_triple(w: &Waveform, p: &AnalysisParams) -> Result<SpectrogramTriple> {
    p.validate()?;
    check_length(w.len(), p)?;
    stft_triple_of(&input_signal(w.samples(), p), w.sample_rate(), p)
}

/// The three STFTs of an already prepared input signal.
pub(crate) fn stft_triple_of(
    signal: &[Complex64],
    sample_rate: u32,
    p: &AnalysisParams,
) -> Result<SpectrogramTriple> {
    p.validate()?;
    check_length(signal.len(), p)?;
    let windows = make_windows(p)?;
    let frames = p.frame_count(signal.len());
    let bins = p.bins();

    let mut plain = ComplexGrid::zeros(frames, bins);
    let mut deriv = ComplexGrid::zeros(frames, bins);
    let mut ramped = ComplexGrid::zeros(frames, bins);
    let mut transform = FrameTransform::new(p);
    for k in 0..frames {
        let segment = &signal[k * p.hop..k * p.hop + p.window_len];
        transform.run(segment, &windows.h, plain.row_mut(k));
        transform.run(segment, &windows.dh, deriv.row_mut(k));
        transform.run(segment, &windows.th, ramped.row_mut(k));
    }

    Ok(SpectrogramTriple {
        plain,
        deriv,
        ramped,
        frame_times: frame_times(p, frames, sample_rate),
        bin_freqs: bin_freqs(p, sample_rate),
        params: *p,
        sample_rate,
        signal_len: signal.len(),
        averaged_slices: 1,
    })
}

/// Magnitude of the plain-window STFT only. Same frames as [`stft_triple`]
/// at a third of the cost and an eighth of the memory.
pub fn stft_magnitude(w: &Waveform, p: &AnalysisParams) -> Result<MagnitudeGrid> {
    p.validate()?;
    check_length(w.len(), p)?;
    let windows = make_windows(p)?;
    let frames = p.frame_count(w.len());
    let bins = p.bins();
    let signal = input_signal(w.samples(), p);

    let mut data = Vec::with_capacity(frames * bins);
    let mut row = vec![Complex64::new(0.0, 0.0); bins];
    let mut transform = FrameTransform::new(p);
    for k in 0..frames {
        transform.run(
            &signal[k * p.hop..k * p.hop + p.window_len],
            &windows.h,
            &mut row,
        );
        data.extend(row.iter().map(|c| c.norm()));
    }
    Ok(MagnitudeGrid { frames, bins, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(w: usize, hop: usize, fft: usize) -> AnalysisParams {
        AnalysisParams::new(w, hop, fft).unwrap()
    }

    #[test]
    fn param_invariants() {
        assert!(AnalysisParams::new(1, 1, 1).is_err());
        assert!(AnalysisParams::new(64, 0, 64).is_err());
        assert!(AnalysisParams::new(64, 65, 64).is_err());
        assert!(AnalysisParams::new(64, 16, 32).is_err());
        assert!(AnalysisParams::default().validate().is_ok());
        assert_eq!(params(2048, 256, 2048).bins(), 1025);
    }

    #[test]
    fn four_point_hann() {
        let w = make_windows(&params(4, 1, 4)).unwrap();
        let expect = [0.0, 0.75, 0.75, 0.0];
        for (a, b) in w.h.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_window_peaks_at_one() {
        let w = make_windows(&params(9, 1, 9)).unwrap();
        assert_eq!(w.h[4], 1.0);
    }

    #[test]
    fn window_symmetries() {
        let p = params(2048, 256, 2048);
        let w = make_windows(&p).unwrap();
        let n = w.h.len();
        assert_eq!(w.h[0], 0.0);
        for i in 0..n {
            assert!((w.h[i] - w.h[n - 1 - i]).abs() < 1e-12);
            assert!((w.th[i] + w.th[n - 1 - i]).abs() < 1e-9);
        }
        assert!(w.dh.iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let w = make_windows(&params(2048, 256, 2048)).unwrap();
        let worst = (1..w.h.len() - 1)
            .map(|n| ((w.h[n + 1] - w.h[n - 1]) / 2.0 - w.dh[n]).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "worst deviation {worst}");
    }

    #[test]
    fn too_short_signal() {
        let w = Waveform::new(vec![0.1; 100], 8000).unwrap();
        assert!(matches!(
            stft_triple(&w, &params(128, 32, 128)),
            Err(Error::SignalTooShort {
                needed: 128,
                got: 100
            })
        ));
    }

    #[test]
    fn shapes_and_axes() {
        let w = Waveform::new(vec![0.25; 1000], 1000).unwrap();
        let p = params(100, 30, 128);
        let s = stft_triple(&w, &p).unwrap();
        assert_eq!(s.frames(), (1000 - 100) / 30 + 1);
        assert_eq!(s.bins(), 65);
        assert_eq!(s.deriv.frames(), s.frames());
        assert_eq!(s.ramped.bins(), s.bins());
        for (k, t) in s.frame_times.iter().enumerate() {
            assert!((t - (k as f64 * 30.0 + 49.5) / 1000.0).abs() < 1e-12);
        }
        assert!((s.bin_freqs[64] - 500.0).abs() < 1e-12);
    }

    #[test]
    fn exact_bin_sinusoid_peaks_in_every_frame() {
        let rate = 8000;
        let p = params(256, 64, 256);
        let bin = 20;
        let f = bin as f64 * rate as f64 / 256.0;
        let samples: Vec<f64> = (0..4000)
            .map(|n| (2.0 * PI * f * n as f64 / rate as f64).cos())
            .collect();
        let s = stft_triple(&Waveform::new(samples, rate).unwrap(), &p).unwrap();
        for k in 0..s.frames() {
            let row = s.plain.row(k);
            let argmax = (0..row.len())
                .max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm()))
                .unwrap();
            assert_eq!(argmax, bin);
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let p = params(256, 100, 512);
        let sa = stft_triple_of(&input_signal(&a, &p), 8000, &p).unwrap();
        let sb = stft_triple_of(&input_signal(&b, &p), 8000, &p).unwrap();
        let ss = stft_triple_of(&input_signal(&sum, &p), 8000, &p).unwrap();
        for (ga, gb, gs) in [
            (&sa.plain, &sb.plain, &ss.plain),
            (&sa.deriv, &sb.deriv, &ss.deriv),
            (&sa.ramped, &sb.ramped, &ss.ramped),
        ] {
            let scale = gs.as_slice().iter().map(|c| c.norm()).fold(0.0, f64::max);
            for ((x, y), z) in ga.as_slice().iter().zip(gb.as_slice()).zip(gs.as_slice()) {
                assert!((x + y - z).norm() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn parseval_on_one_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = params(512, 512, 512).with_input(InputModel::Real);
        let s = stft_triple_of(&input_signal(&x, &p), 16000, &p).unwrap();
        let h = make_windows(&p).unwrap().h;
        let energy: f64 = x.iter().zip(&h).map(|(a, b)| (a * b).powi(2)).sum();
        // Rebuild the two-sided sum from the one-sided spectrum.
        let row = s.plain.row(0);
        let n = p.fft_len;
        let mut spec_energy = row[0].norm_sqr() + row[n / 2].norm_sqr();
        spec_energy += 2.0 * row[1..n / 2].iter().map(|c| c.norm_sqr()).sum::<f64>();
        spec_energy /= n as f64;
        assert!((spec_energy - energy).abs() / energy < 1e-6);
    }

    #[test]
    fn analytic_signal_of_cosine() {
        let n = 4096;
        let f = 0.0371;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64).cos()).collect();
        let z = analytic_signal(&x);
        for (i, v) in z.iter().enumerate() {
            assert!((v.re - x[i]).abs() < 1e-9);
        }
        // Away from the edges the imaginary part is the quadrature sine.
        for i in n / 4..3 * n / 4 {
            assert!((z[i].im - (2.0 * PI * f * i as f64).sin()).abs() < 0.01);
        }
    }

    #[test]
    fn analytic_input_suppresses_the_mirror_image() {
        // A low tone whose image at -f sits within the window's sidelobes.
        let rate = 8000;
        let f = 1.5 * rate as f64 / 256.0;
        let samples: Vec<f64> = (0..8000)
            .map(|n| (2.0 * PI * f * n as f64 / rate as f64).cos())
            .collect();
        let w = Waveform::new(samples, rate).unwrap();
        let p = params(256, 64, 256);
        let k = 60;
        let real = stft_magnitude(&w, &p.with_input(InputModel::Real)).unwrap();
        let analytic = stft_magnitude(&w, &p).unwrap();
        // Bins 1 and 2 straddle the tone symmetrically: equal magnitudes unless
        // the image adds more to the lower one.
        let asym = |g: &MagnitudeGrid| (g.get(k, 1) - g.get(k, 2)).abs() / g.get(k, 2);
        assert!(asym(&real) > 1e-2, "real asymmetry {}", asym(&real));
        assert!(
            asym(&analytic) < 1e-3,
            "analytic asymmetry {}",
            asym(&analytic)
        );
    }

    #[test]
    fn input_model_parsing() {
        assert_eq!("Real".parse::<InputModel>().unwrap(), InputModel::Real);
        assert_eq!(
            InputModel::Analytic
                .to_string()
                .parse::<InputModel>()
                .unwrap(),
            InputModel::Analytic
        );
        assert!("hilbert".parse::<InputModel>().is_err());
    }

    #[test]
    fn magnitude_only_matches_triple() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..3000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Waveform::new(x, 8000).unwrap();
        let p = params(200, 50, 256);
        let full = stft_triple(&w, &p).unwrap().magnitudes();
        let mags = stft_magnitude(&w, &p).unwrap();
        assert_eq!(full, mags);
    }
}
