//! LPC formant baseline: resample, pre-emphasise, Gaussian window,
//! autocorrelation + Levinson-Durbin, then predictor polynomial roots.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{FormantReport, Method};
use crate::audio::{resample, Waveform};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpcParams {
    pub order: usize,
    pub window_ms: f64,
    pub pre_emphasis: f64,
    /// Analysis rate; `None` means `(2k + 1)` kHz for `k` formants.
    pub sample_rate: Option<u32>,
    pub max_bandwidth_hz: f64,
    /// Roots closer than this to 0 Hz or Nyquist are ignored.
    pub edge_margin_hz: f64,
}

impl Default for LpcParams {
    fn default() -> Self {
        Self {
            order: 12,
            window_ms: 25.0,
            pre_emphasis: 0.97,
            sample_rate: None,
            max_bandwidth_hz: 400.0,
            edge_margin_hz: 50.0,
        }
    }
}

impl LpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(invalid("LPC order must be at least 1"));
        }
        if !(self.window_ms > 0.0) {
            return Err(invalid("LPC window must be positive"));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(invalid("pre-emphasis must be in [0, 1)"));
        }
        if self.sample_rate == Some(0) {
            return Err(invalid("LPC sample rate must be positive"));
        }
        Ok(())
    }

    pub fn analysis_rate(&self, k: usize) -> u32 {
        self.sample_rate.unwrap_or((2 * k as u32 + 1) * 1000)
    }
}

/// Signal prepared once for any number of frames.
struct Prepared {
    x: Vec<f64>,
    rate: f64,
    window: Vec<f64>,
}

fn prepare(w: &Waveform, params: &LpcParams, k: usize) -> Result<Prepared> {
    params.validate()?;
    let target = params.analysis_rate(k);
    let resampled;
    let source = if target < w.sample_rate() {
        resampled = resample(w, target)?;
        &resampled
    } else {
        w
    };
    let s = source.samples();
    let a = params.pre_emphasis;
    let x: Vec<f64> = (0..s.len())
        .map(|n| if n == 0 { s[0] } else { s[n] - a * s[n - 1] })
        .collect();
    let rate = source.sample_rate() as f64;
    let len = ((params.window_ms * 1e-3 * rate).round() as usize).max(params.order + 1);
    let sigma = (len as f64 - 1.0) / 5.0;
    let centre = (len as f64 - 1.0) / 2.0;
    let window = (0..len)
        .map(|n| {
            let z = (n as f64 - centre) / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    Ok(Prepared { x, rate, window })
}

/// Predictor coefficients `a[1..=p]` of `x[n] ≈ -Σ a_i x[n-i]`, or `None`
/// when the prediction error stops being positive.
fn levinson_durbin(r: &[f64], order: usize) -> Option<Vec<f64>> {
    if !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let kappa = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + kappa * prev[i - j];
        }
        a[i] = kappa;
        err *= 1.0 - kappa * kappa;
        if !(err > 0.0) {
            return None;
        }
    }
    Some(a)
}

fn frame_formants(prep: &Prepared, start: usize, params: &LpcParams, k: usize) -> FormantReport {
    let frame: Vec<f64> = prep.x[start..start + prep.window.len()]
        .iter()
        .zip(&prep.window)
        .map(|(s, g)| s * g)
        .collect();
    let p = params.order;
    let r: Vec<f64> = (0..=p)
        .map(|lag| {
            frame[..frame.len().saturating_sub(lag)]
                .iter()
                .zip(&frame[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let Some(a) = levinson_durbin(&r, p) else {
        return FormantReport::failed(Method::Lpc, k);
    };

    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    let nyquist = prep.rate / 2.0;
    let mut freqs: Vec<f64> = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0)
        .filter_map(|z| {
            let f = z.im.atan2(z.re) * prep.rate / (2.0 * PI);
            let bw = -z.norm().ln() * prep.rate / PI;
            (bw <= params.max_bandwidth_hz
                && f > params.edge_margin_hz
                && f < nyquist - params.edge_margin_hz)
                .then_some(f)
        })
        .collect();
    freqs.sort_by(f64::total_cmp);
    FormantReport::from_sorted(Method::Lpc, &freqs, k)
}

/// LPC formants of one window starting `window_start` seconds into `w`.
pub fn lpc_formants(
    w: &Waveform,
    params: &LpcParams,
    window_start: f64,
    k: usize,
) -> Result<FormantReport> {
    let prep = prepare(w, params, k)?;
    let start = (window_start * prep.rate).round() as usize;
    if !(window_start >= 0.0) || start + prep.window.len() > prep.x.len() {
        return Err(Error::SignalTooShort {
            needed: start + prep.window.len(),
            got: prep.x.len(),
        });
    }
    Ok(frame_formants(&prep, start, params, k))
}

/// Number of windows a track of this geometry produces.
pub fn track_count(duration: f64, window_s: f64, start: f64, stride: f64) -> usize {
    let room = duration - start - window_s;
    if room < 0.0 {
        0
    } else {
        (room / stride + 1e-9).floor() as usize + 1
    }
}

/// Stride that yields exactly `count` windows over the utterance.
pub fn stride_for_count(duration: f64, window_s: f64, count: usize) -> f64 {
    if count <= 1 {
        duration
    } else {
        (duration - window_s) / (count - 1) as f64
    }
}

/// Sliding-window LPC reports, one per stride, starting at `start` seconds.
pub fn lpc_track(
    w: &Waveform,
    params: &LpcParams,
    k: usize,
    start: f64,
    stride: f64,
) -> Result<Vec<FormantReport>> {
    if !(stride > 0.0) {
        return Err(invalid(format!("stride must be positive, got {stride}")));
    }
    let prep = prepare(w, params, k)?;
    let win = prep.window.len();
    if prep.x.len() <= win {
        return Err(Error::SignalTooShort {
            needed: win + 1,
            got: prep.x.len(),
        });
    }
    let duration = prep.x.len() as f64 / prep.rate;
    let count = track_count(duration, win as f64 / prep.rate, start, stride);
    Ok((0..count)
        .filter_map(|i| {
            let s = ((start + i as f64 * stride) * prep.rate).round() as usize;
            (s + win <= prep.x.len()).then(|| frame_formants(&prep, s, params, k))
        })
        .collect())
}

/// Per-formant mean over the frames that produced it. A formant found in
/// fewer than half the frames is reported as failed.
pub fn track_mean(reports: &[FormantReport], k: usize) -> FormantReport {
    if reports.is_empty() {
        return FormantReport::failed(Method::Lpc, k);
    }
    let slots = (0..k)
        .map(|i| {
            let values: Vec<f64> = reports.iter().filter_map(|r| r.get(i)).collect();
            (2 * values.len() >= reports.len() && !values.is_empty())
                .then(|| values.iter().sum::<f64>() / values.len() as f64)
        })
        .collect();
    FormantReport::from_slots(Method::Lpc, slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levinson_matches_direct_solve() {
        // Autocorrelation of an AR(2) process x[n] = 1.2 x[n-1] - 0.5 x[n-2] + e.
        let (a1, a2) = (1.2, -0.5);
        let r1 = a1 / (1.0 - a2);
        let r2 = a1 * r1 + a2;
        let a = levinson_durbin(&[1.0, r1, r2], 2).unwrap();
        assert!((a[1] + a1).abs() < 1e-12);
        assert!((a[2] + a2).abs() < 1e-12);
    }

    #[test]
    fn silence_is_whole_frame_failure() {
        let w = Waveform::new(vec![0.0; 11_000], 11_000).unwrap();
        let r = lpc_formants(&w, &LpcParams::default(), 0.1, 5).unwrap();
        assert_eq!(r.failures(), 5);
    }

    #[test]
    fn window_must_fit() {
        let w = Waveform::new(vec![0.1; 200], 11_000).unwrap();
        assert!(matches!(
            lpc_formants(&w, &LpcParams::default(), 0.0, 5),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn track_counts() {
        assert_eq!(
            track_count(0.5, 0.025, 0.0, stride_for_count(0.5, 0.025, 67)),
            67
        );
        assert_eq!(track_count(0.5, 0.025, 0.0, 0.5), 1);
        assert_eq!(track_count(0.02, 0.025, 0.0, 0.01), 0);
    }

    #[test]
    fn track_mean_rules() {
        let r = |v: Vec<Option<f64>>| FormantReport::from_slots(Method::Lpc, v);
        let reports = vec![
            r(vec![Some(600.0), Some(1200.0), None]),
            r(vec![Some(700.0), None, None]),
            r(vec![Some(650.0), Some(1300.0), Some(2500.0)]),
        ];
        let m = track_mean(&reports, 3);
        assert_eq!(m.formants, vec![Some(650.0), Some(1250.0), None]);
    }
}
