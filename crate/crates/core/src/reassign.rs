//! Time-frequency reassignment and pruning.
//!
//! Each STFT cell `(t, f)` is moved to
//!
//! ```text
//! t̂ = t + Re{X_th / X} / fs          (seconds)
//! f̂ = f - Im{X_dh / X} · fs / 2π     (Hz)
//! ```
//!
//! where `X_th` and `X_dh` are the STFTs taken with the time-ramped and the
//! derivative window. For a stationary sinusoid `f̂` is its frequency; for an
//! impulse `t̂` is its arrival time.
//!
//! Pruning keeps a cell only if it passes all four tests: amplitude above a
//! threshold relative to the grid maximum, `f̂` inside the band, `t̂` inside
//! the signal, and one of the two phase-stability indicators. The indicators
//! are estimates of the mixed partial derivative of the STFT phase, which is
//! 0 on line components and 1 on impulses:
//!
//! * `dIF = ∂f̂/∂f`, first difference across adjacent bins;
//! * `dGD = ∂(t - t̂)/∂t`, first difference across adjacent frames.
//!
//! A cell is stable when `|dIF| < limit` or `|dGD - 1| < limit`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectral::{AnalysisParams, SpectrogramTriple};

/// Pruning thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneParams {
    /// Amplitude floor in dB relative to the grid maximum.
    pub amp_threshold_db: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub stability_limit: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self {
            amp_threshold_db: -100.0,
            f_min: 100.0,
            f_max: 10_000.0,
            stability_limit: 0.25,
        }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp_threshold_db < 0.0) {
            return Err(invalid(format!(
                "amplitude threshold must be negative dB, got {}",
                self.amp_threshold_db
            )));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(invalid(format!(
                "frequency band must satisfy 0 <= f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if !(self.stability_limit > 0.0) {
            return Err(invalid(format!(
                "stability limit must be positive, got {}",
                self.stability_limit
            )));
        }
        Ok(())
    }
}

/// One reassigned cell before pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCell {
    pub t_hat: f64,
    pub f_hat: f64,
    /// Linear `|X|`.
    pub mag: f64,
    pub d_if: f64,
    pub d_gd: f64,
    /// False where `|X| = 0` and the corrections are undefined.
    pub valid: bool,
}

impl RawCell {
    pub const INVALID: RawCell = RawCell {
        t_hat: f64::NAN,
        f_hat: f64::NAN,
        mag: 0.0,
        d_if: f64::NAN,
        d_gd: f64::NAN,
        valid: false,
    };
}

/// Row-major `frames × bins` grid of reassigned cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub frames: usize,
    pub bins: usize,
    pub cells: Vec<RawCell>,
    pub params: AnalysisParams,
    pub sample_rate: u32,
}

impl RawGrid {
    pub fn get(&self, frame: usize, bin: usize) -> &RawCell {
        &self.cells[frame * self.bins + bin]
    }
}

/// A pruned point, in seconds, Hz and dB relative to the grid maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub t_sec: f64,
    pub f_hz: f64,
    pub mag_db: f64,
}

/// Sparse output of reassignment and pruning, ordered by frame then bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ReassignedPointCloud {
    pub points: Vec<CloudPoint>,
    pub source_duration: f64,
    pub analysis: AnalysisParams,
    pub prune: PruneParams,
    pub sample_rate: u32,
}

impl ReassignedPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Applies the time and frequency corrections to every cell and estimates
/// the two stability indicators.
pub fn reassign_raw(s: &SpectrogramTriple) -> RawGrid {
    let frames = s.frames();
    let bins = s.bins();
    let fs = s.sample_rate as f64;
    let mut cells = Vec::with_capacity(frames * bins);

    for k in 0..frames {
        let t = s.frame_times[k];
        let (plain, deriv, ramped) = (s.plain.row(k), s.deriv.row(k), s.ramped.row(k));
        for b in 0..bins {
            let x = plain[b];
            let power = x.norm_sqr();
            if power == 0.0 || !power.is_finite() {
                cells.push(RawCell::INVALID);
                continue;
            }
            let time_corr = (ramped[b] / x).re / fs;
            let freq_corr = (deriv[b] / x).im * fs / (2.0 * PI);
            cells.push(RawCell {
                t_hat: t + time_corr,
                f_hat: s.bin_freqs[b] - freq_corr,
                mag: power.sqrt(),
                d_if: f64::NAN,
                d_gd: f64::NAN,
                valid: true,
            });
        }
    }

    let df = fs / s.params.fft_len as f64;
    let dt = s.params.hop as f64 / fs;
    let diff = |a: &RawCell, b: &RawCell, value: fn(&RawCell) -> f64| {
        if a.valid && b.valid {
            value(b) - value(a)
        } else {
            f64::NAN
        }
    };

    // Forward differences, with the last bin/frame reusing its neighbour's.
    let mut d_if = vec![f64::NAN; frames * bins];
    let mut d_gd = vec![f64::NAN; frames * bins];
    if bins >= 2 {
        for k in 0..frames {
            let row = &cells[k * bins..(k + 1) * bins];
            for b in 0..bins - 1 {
                d_if[k * bins + b] = diff(&row[b], &row[b + 1], |c| c.f_hat) / df;
            }
            d_if[k * bins + bins - 1] = d_if[k * bins + bins - 2];
        }
    }
    if frames >= 2 {
        for k in 0..frames - 1 {
            let lag = |c: &RawCell| c.t_hat;
            for b in 0..bins {
                let here = &cells[k * bins + b];
                let next = &cells[(k + 1) * bins + b];
                // (t_{k+1} - t̂_{k+1}) - (t_k - t̂_k) = dt - (t̂_{k+1} - t̂_k)
                d_gd[k * bins + b] = (dt - diff(here, next, lag)) / dt;
            }
        }
        let (head, tail) = d_gd.split_at_mut((frames - 1) * bins);
        tail.copy_from_slice(&head[(frames - 2) * bins..]);
    }
    for ((cell, i), g) in cells.iter_mut().zip(d_if).zip(d_gd) {
        cell.d_if = i;
        cell.d_gd = g;
    }

    RawGrid {
        frames,
        bins,
        cells,
        params: s.params,
        sample_rate: s.sample_rate,
    }
}

/// True when a cell passes all four pruning tests.
#[inline]
pub(crate) fn keep(cell: &RawCell, mag_db: f64, p: &PruneParams, duration: f64) -> bool {
    cell.valid
        && mag_db >= p.amp_threshold_db
        && cell.f_hat >= p.f_min
        && cell.f_hat <= p.f_max
        && cell.t_hat >= 0.0
        && cell.t_hat <= duration
        && ((cell.d_if.abs() < p.stability_limit) || ((cell.d_gd - 1.0).abs() < p.stability_limit))
}

/// Keeps the cells that pass the amplitude, band, containment and stability
/// tests. `duration` is the length in seconds of the analysed signal.
pub fn prune(raw: &RawGrid, p: &PruneParams, duration: f64) -> ReassignedPointCloud {
    let max_mag = raw
        .cells
        .iter()
        .filter(|c| c.valid)
        .map(|c| c.mag)
        .fold(0.0, f64::max);

    let points = if max_mag > 0.0 {
        raw.cells
            .iter()
            .filter_map(|cell| {
                if !cell.valid {
                    return None;
                }
                let mag_db = 20.0 * (cell.mag / max_mag).log10();
                keep(cell, mag_db, p, duration).then_some(CloudPoint {
                    t_sec: cell.t_hat,
                    f_hz: cell.f_hat,
                    mag_db,
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    ReassignedPointCloud {
        points,
        source_duration: duration,
        analysis: raw.params,
        prune: *p,
        sample_rate: raw.sample_rate,
    }
}

/// `reassign_raw` followed by `prune` over the triple's own duration.
pub fn reassigned_cloud(s: &SpectrogramTriple, p: &PruneParams) -> Result<ReassignedPointCloud> {
    p.validate()?;
    Ok(prune(&reassign_raw(s), p, s.duration()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft_triple, ComplexGrid, InputModel};
    use crate::Waveform;
    use num_complex::Complex64;

    fn single_cell(x: Complex64, deriv: Complex64, ramped: Complex64) -> SpectrogramTriple {
        let params = AnalysisParams::new(4, 1, 4).unwrap();
        let grid = |v: Complex64| {
            let mut data = vec![Complex64::new(1.0, 0.0); 3];
            data[1] = v;
            ComplexGrid::from_vec(1, 3, data).unwrap()
        };
        SpectrogramTriple {
            plain: grid(x),
            deriv: grid(deriv),
            ramped: grid(ramped),
            frame_times: vec![0.5],
            bin_freqs: vec![0.0, 100.0, 200.0],
            params,
            sample_rate: 400,
            signal_len: 400,
            averaged_slices: 1,
        }
    }

    #[test]
    fn zero_corrections_leave_cell_in_place() {
        let zero = Complex64::new(0.0, 0.0);
        let raw = reassign_raw(&single_cell(Complex64::new(0.3, -0.2), zero, zero));
        let c = raw.get(0, 1);
        assert!(c.valid);
        assert_eq!(c.t_hat, 0.5);
        assert_eq!(c.f_hat, 100.0);
    }

    #[test]
    fn zero_magnitude_cell_is_invalid() {
        let one = Complex64::new(1.0, 0.0);
        let raw = reassign_raw(&single_cell(Complex64::new(0.0, 0.0), one, one));
        assert!(!raw.get(0, 1).valid);
        assert!(raw.get(0, 0).valid);
    }

    #[test]
    fn correction_units() {
        // Re{X_th/X} = 40 samples -> +0.1 s at 400 Hz; Im{X_dh/X} = 0.5 rad/sample -> -31.83 Hz.
        let x = Complex64::new(2.0, 0.0);
        let raw = reassign_raw(&single_cell(
            x,
            Complex64::new(0.0, 1.0),
            Complex64::new(80.0, 0.0),
        ));
        let c = raw.get(0, 1);
        assert!((c.t_hat - 0.6).abs() < 1e-12);
        assert!((c.f_hat - (100.0 - 0.5 * 400.0 / (2.0 * PI))).abs() < 1e-9);
    }

    #[test]
    fn all_below_threshold_is_empty() {
        let w = Waveform::new(vec![0.0; 4096], 48000).unwrap();
        let s = stft_triple(&w, &AnalysisParams::new(512, 128, 512).unwrap()).unwrap();
        let cloud = reassigned_cloud(&s, &PruneParams::default()).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn impulse_cells_are_time_stable() {
        let mut x = vec![0.0; 4800];
        x[2000] = 1.0;
        let w = Waveform::new(x, 48000).unwrap();
        let p = AnalysisParams::new(256, 32, 256)
            .unwrap()
            .with_input(InputModel::Real);
        let s = stft_triple(&w, &p).unwrap();
        let raw = reassign_raw(&s);
        // A frame well inside the impulse's support.
        let k = (2000 - 128) / 32;
        for b in 5..100 {
            let c = raw.get(k, b);
            assert!((c.t_hat - 2000.0 / 48000.0).abs() < 1e-9);
            assert!((c.f_hat - s.bin_freqs[b]).abs() < 1e-6);
            assert!((c.d_if - 1.0).abs() < 1e-6);
            assert!((c.d_gd - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = PruneParams::default();
        p.amp_threshold_db = 0.0;
        assert!(p.validate().is_err());
        let mut p = PruneParams::default();
        p.f_min = 5000.0;
        p.f_max = 100.0;
        assert!(p.validate().is_err());
        let mut p = PruneParams::default();
        p.stability_limit = 0.0;
        assert!(p.validate().is_err());
    }
}
