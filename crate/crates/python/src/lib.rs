//! Python bindings. Signals cross the boundary as `list[float]` plus a
//! sample rate; point clouds come back as a `PointCloud` object.

use napres::audio::{self, BitDepth};
use napres::formant::{
    fit_gmm, formants_from_gmm, histogram, lpc_track, stride_for_count, track_mean, LpcParams,
    Weighting,
};
use napres::harness::{self, summarize, SweepConfig, VowelSpec};
use napres::pulse::{self, AveragingDomain};
use napres::reassign::reassigned_cloud;
use napres::spectral::stft_triple;
use napres::{
    AnalysisParams, Error, InputModel, NapresParams, PruneParams, ReassignedPointCloud, Waveform,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Csv { .. } => PyValueError::new_err(e.to_string()),
        Error::Io(_) | Error::Wav { .. } => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn waveform(samples: Vec<f64>, sample_rate: u32) -> PyResult<Waveform> {
    Waveform::new(samples, sample_rate).map_err(py_err)
}

/// Pruned reassigned points with the parameters that produced them.
#[pyclass(frozen)]
pub struct PointCloud {
    inner: ReassignedPointCloud,
    /// Pulses averaged; 1 for a plain reassigned spectrogram.
    #[pyo3(get)]
    j: usize,
}

#[pymethods]
impl PointCloud {
    /// Point times in seconds.
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.t_sec).collect()
    }

    /// Point frequencies in Hz.
    #[getter]
    fn freqs(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.f_hz).collect()
    }

    /// Point levels in dB relative to the strongest cell.
    #[getter]
    fn mags_db(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.mag_db).collect()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.source_duration
    }

    fn to_csv(&self) -> String {
        napres::io::cloud_csv(&self.inner)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = napres::io::parse_cloud_csv(text).map_err(py_err)?;
        Ok(Self { inner, j: 1 })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud(points={}, j={}, duration={:.4})",
            self.inner.len(),
            self.j,
            self.inner.source_duration
        )
    }
}

/// Returns `(samples, sample_rate)`, mixed down to mono.
#[pyfunction]
fn read_wav(path: &str) -> PyResult<(Vec<f64>, u32)> {
    let w = audio::read_wav(path).map_err(py_err)?;
    let rate = w.sample_rate();
    Ok((w.samples().to_vec(), rate))
}

#[pyfunction]
#[pyo3(signature = (path, samples, sample_rate, depth = "float32"))]
fn write_wav(path: &str, samples: Vec<f64>, sample_rate: u32, depth: &str) -> PyResult<()> {
    let depth = match depth {
        "float32" => BitDepth::Float32,
        "pcm16" => BitDepth::Pcm16,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown bit depth '{other}'"
            )))
        }
    };
    audio::write_wav(&waveform(samples, sample_rate)?, path, depth).map_err(py_err)
}

/// Synthetic vowel at RMS 0.2. `formants` is a list of `(freq, bandwidth)`.
#[pyfunction]
#[pyo3(signature = (f0 = 120.0, formants = None, duration = 0.5, sample_rate = 48_000, jitter = 0.0, seed = 0))]
fn synth_vowel(
    f0: f64,
    formants: Option<Vec<(f64, f64)>>,
    duration: f64,
    sample_rate: u32,
    jitter: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let default = VowelSpec::default();
    let spec = VowelSpec {
        f0,
        formants: formants.unwrap_or(default.formants),
        duration,
        sample_rate,
        jitter,
        ..default
    };
    Ok(harness::synth_vowel(&spec, seed)
        .map_err(py_err)?
        .samples()
        .to_vec())
}

#[pyfunction]
fn add_white_noise(samples: Vec<f64>, sample_rate: u32, snr: f64, seed: u64) -> PyResult<Vec<f64>> {
    let w = audio::add_white_noise(&waveform(samples, sample_rate)?, snr, seed).map_err(py_err)?;
    Ok(w.samples().to_vec())
}

#[pyfunction]
#[pyo3(signature = (samples, sample_rate, f_lo = 50.0, f_hi = 500.0))]
fn estimate_f0(samples: Vec<f64>, sample_rate: u32, f_lo: f64, f_hi: f64) -> PyResult<f64> {
    pulse::estimate_f0(&waveform(samples, sample_rate)?, (f_lo, f_hi)).map_err(py_err)
}

/// Reassigned spectrogram of the whole signal, without pulse averaging.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, window = 2048, hop = 256, fft_len = 2048, threshold_db = -100.0, input_model = "analytic"))]
fn reassign(
    samples: Vec<f64>,
    sample_rate: u32,
    window: usize,
    hop: usize,
    fft_len: usize,
    threshold_db: f64,
    input_model: &str,
) -> PyResult<PointCloud> {
    let p = AnalysisParams::new(window, hop, fft_len)
        .map_err(py_err)?
        .with_input(parse::<InputModel>(input_model)?);
    let prune = PruneParams {
        amp_threshold_db: threshold_db,
        ..PruneParams::default()
    };
    let s = stft_triple(&waveform(samples, sample_rate)?, &p).map_err(py_err)?;
    let inner = reassigned_cloud(&s, &prune).map_err(py_err)?;
    Ok(PointCloud { inner, j: 1 })
}

/// Pulse-averaged pruned reassigned spectrogram.
#[pyfunction]
#[pyo3(name = "napres", signature = (samples, sample_rate, f0, max_j = None, threshold_db = -100.0, averaging = "temporal"))]
fn napres_cloud(
    samples: Vec<f64>,
    sample_rate: u32,
    f0: f64,
    max_j: Option<usize>,
    threshold_db: f64,
    averaging: &str,
) -> PyResult<PointCloud> {
    let params = NapresParams {
        max_j,
        prune: PruneParams {
            amp_threshold_db: threshold_db,
            ..PruneParams::default()
        },
        averaging: parse::<AveragingDomain>(averaging)?,
        ..NapresParams::with_f0(f0)
    };
    let out = pulse::napres(&waveform(samples, sample_rate)?, &params).map_err(py_err)?;
    Ok(PointCloud {
        inner: out.cloud,
        j: out.alignment.j,
    })
}

/// Formants from a Gaussian mixture fit to the cloud's frequency histogram;
/// `None` marks a formant that was not found.
#[pyfunction]
#[pyo3(signature = (cloud, k = 5, components = 6, bin_width = 20.0, weighting = "count", seed = 0))]
fn gmm_formants(
    cloud: &PointCloud,
    k: usize,
    components: usize,
    bin_width: f64,
    weighting: &str,
    seed: u64,
) -> PyResult<Vec<Option<f64>>> {
    let h = histogram(&cloud.inner, bin_width, parse::<Weighting>(weighting)?).map_err(py_err)?;
    let fit = fit_gmm(&h, components, seed).map_err(py_err)?;
    Ok(formants_from_gmm(&fit, k).formants)
}

/// Mean LPC formant track over `frames` evenly spaced analysis frames.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, k = 5, order = 12, frames = 67))]
fn lpc_formants(
    samples: Vec<f64>,
    sample_rate: u32,
    k: usize,
    order: usize,
    frames: usize,
) -> PyResult<Vec<Option<f64>>> {
    let w = waveform(samples, sample_rate)?;
    let p = LpcParams {
        order,
        ..LpcParams::default()
    };
    let stride = stride_for_count(w.duration(), p.window_ms * 1e-3, frames);
    let track = lpc_track(&w, &p, k, 0.0, stride).map_err(py_err)?;
    Ok(track_mean(&track, k).formants)
}

/// Noise sweep on the default synthetic vowel; returns the summary table.
#[pyfunction]
#[pyo3(signature = (snr_levels = vec![100.0, 5.0, 2.0, 1.0], replicas = 20, seed = 0))]
fn sweep(snr_levels: Vec<f64>, replicas: usize, seed: u64) -> PyResult<String> {
    let cfg = SweepConfig {
        snr_levels,
        replicas,
        seed,
        ..SweepConfig::default()
    };
    let clean = harness::synth_vowel(&VowelSpec::default(), seed).map_err(py_err)?;
    let report = harness::run_sweep(&clean, &cfg).map_err(py_err)?;
    Ok(summarize(&report))
}

#[pymodule]
fn pynapres(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PointCloud>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(synth_vowel, m)?)?;
    m.add_function(wrap_pyfunction!(add_white_noise, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_f0, m)?)?;
    m.add_function(wrap_pyfunction!(reassign, m)?)?;
    m.add_function(wrap_pyfunction!(napres_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(gmm_formants, m)?)?;
    m.add_function(wrap_pyfunction!(lpc_formants, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
