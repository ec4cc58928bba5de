//! Command-line flags and their conversion into library parameters.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use napres::audio::SnrDefinition;
use napres::formant::{LpcParams, Method, Weighting};
use napres::harness::{PulseShape, SweepConfig, VowelSpec};
use napres::pulse::AveragingDomain;
use napres::{AnalysisParams, InputModel, NapresParams, PruneParams};

#[derive(Debug, Parser)]
#[command(
    name = "napres",
    version,
    about = "Pulse-averaged reassigned spectrograms and formant estimation"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align and average glottal pulses, then write the reassigned point cloud.
    Napres(NapresCmd),
    /// Estimate formants from a WAV file or a point-cloud CSV.
    Formants(FormantsCmd),
    /// Monte Carlo noise sweep comparing the estimators.
    Sweep(SweepCmd),
    /// Plot a point-cloud CSV as a PNG scatter image.
    Render(RenderCmd),
}

#[derive(Debug, Args)]
pub struct NapresCmd {
    /// Input WAV file (one cropped vowel).
    pub input: PathBuf,

    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub pitch: PitchArgs,

    #[command(flatten)]
    pub crop: CropArgs,

    #[command(flatten)]
    pub pulse: PulseArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,

    #[command(flatten)]
    pub prune: PruneArgs,

    /// Also write cloud.png.
    #[arg(long)]
    pub plot: bool,

    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
pub struct FormantsCmd {
    /// WAV file or point-cloud CSV (`.csv`).
    pub input: PathBuf,

    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,

    /// Estimators to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
    pub methods: Vec<Method>,

    /// Number of formants reported.
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,

    /// Seed for the GMM restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub pitch: OptionalPitchArgs,

    #[command(flatten)]
    pub crop: CropArgs,

    #[command(flatten)]
    pub gmm: GmmArgs,

    #[command(flatten)]
    pub lpc: LpcArgs,

    #[command(flatten)]
    pub pulse: PulseArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,

    #[command(flatten)]
    pub prune: PruneArgs,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Clean input WAV; omit together with --synth to use a synthetic vowel.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub input: Option<PathBuf>,

    /// Use a synthetic vowel as the clean signal.
    #[arg(long)]
    pub synth: bool,

    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,

    /// SNR levels, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![100.0, 5.0, 2.0, 1.0])]
    pub snr: Vec<f64>,

    /// Noisy replicas per SNR level.
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Estimators to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
    pub methods: Vec<Method>,

    /// How an SNR figure maps to a noise level (amplitude or power).
    #[arg(long, default_value_t = SnrDefinition::Amplitude)]
    pub snr_definition: SnrDefinition,

    #[arg(short, long, default_value_t = 5)]
    pub k: usize,

    #[command(flatten)]
    pub pitch: OptionalPitchArgs,

    #[command(flatten)]
    pub vowel: VowelArgs,

    #[command(flatten)]
    pub gmm: GmmArgs,

    #[command(flatten)]
    pub lpc: LpcArgs,

    #[command(flatten)]
    pub pulse: PulseArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,

    #[command(flatten)]
    pub prune: PruneArgs,
}

#[derive(Debug, Args)]
pub struct RenderCmd {
    /// Point-cloud CSV written by `napres napres`.
    pub input: PathBuf,

    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PitchArgs {
    /// Pulse rate (f0) in Hz.
    #[arg(long)]
    pub f0: Option<f64>,

    /// Estimate f0 by autocorrelation instead.
    #[arg(long)]
    pub estimate_f0: bool,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct OptionalPitchArgs {
    /// Pulse rate (f0) in Hz.
    #[arg(long)]
    pub f0: Option<f64>,

    /// Estimate f0 by autocorrelation instead.
    #[arg(long)]
    pub estimate_f0: bool,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    /// Crop start in seconds.
    #[arg(long)]
    pub start: Option<f64>,

    /// Crop end in seconds.
    #[arg(long)]
    pub end: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PulseArgs {
    /// Average at most this many pulses.
    #[arg(long)]
    pub max_j: Option<usize>,

    /// Glottal pulses per template.
    #[arg(long, default_value_t = 1)]
    pub pulses_per_template: usize,

    /// Where slices are averaged: temporal or spectral.
    #[arg(long, default_value_t = AveragingDomain::Temporal)]
    pub averaging: AveragingDomain,

    /// Minimum peak spacing as a fraction of the template width.
    #[arg(long, default_value_t = 0.8)]
    pub min_separation: f64,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Analysis window length in samples.
    #[arg(long, default_value_t = NapresParams::PULSE_ANALYSIS.window_len)]
    pub window: usize,

    /// Frame hop in samples.
    #[arg(long, default_value_t = NapresParams::PULSE_ANALYSIS.hop)]
    pub hop: usize,

    /// FFT length (zero-padded window).
    #[arg(long, default_value_t = NapresParams::PULSE_ANALYSIS.fft_len)]
    pub fft_len: usize,

    /// Frames cut from the analytic or the real signal.
    #[arg(long, default_value_t = InputModel::Analytic)]
    pub input_model: InputModel,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Amplitude floor in dB relative to the loudest cell.
    #[arg(long, default_value_t = -100.0, allow_negative_numbers = true)]
    pub threshold_db: f64,

    #[arg(long, default_value_t = 100.0)]
    pub f_min: f64,

    #[arg(long, default_value_t = 10_000.0)]
    pub f_max: f64,

    /// Stability tolerance for the line and impulse tests.
    #[arg(long, default_value_t = 0.25)]
    pub stability: f64,
}

#[derive(Debug, Args)]
pub struct GmmArgs {
    /// Gaussian components fitted to the histogram.
    #[arg(long, default_value_t = 6)]
    pub components: usize,

    /// Histogram bin width in Hz.
    #[arg(long, default_value_t = 20.0)]
    pub bin_width: f64,

    /// Histogram weighting: count or magnitude.
    #[arg(long, default_value_t = Weighting::Count)]
    pub weighting: Weighting,
}

#[derive(Debug, Args)]
pub struct LpcArgs {
    #[arg(long, default_value_t = 12)]
    pub lpc_order: usize,

    #[arg(long, default_value_t = 25.0)]
    pub lpc_window_ms: f64,

    #[arg(long, default_value_t = 0.97)]
    pub pre_emphasis: f64,

    /// LPC analysis rate in Hz; defaults to (2k + 1) kHz.
    #[arg(long)]
    pub lpc_rate: Option<u32>,

    /// Widest root bandwidth accepted as a formant, Hz.
    #[arg(long, default_value_t = 400.0)]
    pub lpc_max_bandwidth: f64,

    /// LPC windows per utterance.
    #[arg(long, default_value_t = 67)]
    pub lpc_frames: usize,
}

#[derive(Debug, Args)]
pub struct VowelArgs {
    /// Synthetic vowel f0 in Hz.
    #[arg(long, default_value_t = 120.0)]
    pub vowel_f0: f64,

    /// Synthetic formants as `freq:bandwidth` pairs, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "650:80,1230:90,2550:120,3600:160,4730:200"
    )]
    pub formants: Vec<FormantSpec>,

    /// Synthetic vowel duration in seconds.
    #[arg(long, default_value_t = 0.5)]
    pub duration: f64,

    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,

    /// impulse-train or rosenberg.
    #[arg(long, default_value_t = PulseShape::ImpulseTrain)]
    pub pulse_shape: PulseShape,

    /// Per-period jitter as a fraction of the period.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantSpec(pub f64, pub f64);

impl std::str::FromStr for FormantSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (f, bw) = s
            .split_once(':')
            .ok_or_else(|| format!("expected freq:bandwidth, got '{s}'"))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{v}'"))
        };
        Ok(Self(num(f)?, num(bw)?))
    }
}

impl AnalysisArgs {
    pub fn params(&self) -> AnalysisParams {
        AnalysisParams {
            window_len: self.window,
            hop: self.hop,
            fft_len: self.fft_len,
            input: self.input_model,
        }
    }
}

impl PruneArgs {
    pub fn params(&self) -> PruneParams {
        PruneParams {
            amp_threshold_db: self.threshold_db,
            f_min: self.f_min,
            f_max: self.f_max,
            stability_limit: self.stability,
        }
    }
}

impl PulseArgs {
    pub fn params(&self, f0_hz: f64, analysis: &AnalysisArgs, prune: &PruneArgs) -> NapresParams {
        NapresParams {
            f0_hz,
            pulses_per_template: self.pulses_per_template,
            max_j: self.max_j,
            analysis: analysis.params(),
            prune: prune.params(),
            averaging: self.averaging,
            min_separation_factor: self.min_separation,
        }
    }
}

impl LpcArgs {
    pub fn params(&self) -> LpcParams {
        LpcParams {
            order: self.lpc_order,
            window_ms: self.lpc_window_ms,
            pre_emphasis: self.pre_emphasis,
            sample_rate: self.lpc_rate,
            max_bandwidth_hz: self.lpc_max_bandwidth,
            ..LpcParams::default()
        }
    }
}

impl VowelArgs {
    pub fn spec(&self) -> VowelSpec {
        VowelSpec {
            f0: self.vowel_f0,
            formants: self.formants.iter().map(|f| (f.0, f.1)).collect(),
            duration: self.duration,
            sample_rate: self.sample_rate,
            pulse_shape: self.pulse_shape,
            jitter: self.jitter,
        }
    }
}

/// Sweep configuration from the flags, aligned at `f0_hz`.
pub fn sweep_config(cmd: &SweepCmd, f0_hz: f64) -> SweepConfig {
    SweepConfig {
        snr_levels: cmd.snr.clone(),
        replicas: cmd.replicas,
        seed: cmd.seed,
        methods: cmd.methods.clone(),
        napres: cmd.pulse.params(f0_hz, &cmd.analysis, &cmd.prune),
        lpc: cmd.lpc.params(),
        k: cmd.k,
        gmm_components: cmd.gmm.components,
        bin_width: cmd.gmm.bin_width,
        weighting: cmd.gmm.weighting,
        snr_definition: cmd.snr_definition,
        lpc_frames: cmd.lpc.lpc_frames,
    }
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Image width in pixels.
    #[arg(long, default_value_t = 1200)]
    pub width: u32,

    /// Image height in pixels.
    #[arg(long, default_value_t = 800)]
    pub height: u32,
}
