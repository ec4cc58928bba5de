//! Non-locally averaged pruned reassigned spectrograms.
//!
//! The crate condenses the glottal pulses of a cropped vowel into a single
//! averaged, pruned, reassigned spectrogram and extracts formant frequencies
//! from it. The processing chain is:
//!
//! 1. [`spectral::stft_triple`] computes the plain, time-derivative and
//!    time-ramped STFTs of a [`Waveform`].
//! 2. [`pulse::napres`] matches a one-pulse template against the magnitude
//!    spectrogram, picks the matching pulse onsets and averages the aligned
//!    slices.
//! 3. [`reassign::reassign_raw`] relocates every cell to its instantaneous
//!    frequency / group delay coordinates and [`reassign::prune`] keeps the
//!    stable, in-band, above-threshold points.
//! 4. [`formant`] fits a Gaussian mixture to the frequency histogram of the
//!    point cloud, with a conventional LPC tracker as the baseline.
//!
//! [`harness`] generates synthetic vowels and runs seeded Monte Carlo noise
//! sweeps comparing both formant estimators.

pub mod audio;
mod error;
pub mod formant;
pub mod harness;
pub mod io;
pub mod pulse;
pub mod reassign;
pub mod spectral;

pub use audio::Waveform;
pub use error::{Error, Result};
pub use formant::{FormantReport, FrequencyHistogram, GmmFit};
pub use pulse::{NapresOutput, NapresParams, PulseAlignment};
pub use reassign::{PruneParams, ReassignedPointCloud};
pub use spectral::{AnalysisParams, InputModel, SpectrogramTriple};
