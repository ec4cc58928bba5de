//! Synthetic vowels and the seeded Monte Carlo noise sweep.

mod summary;
mod sweep;
mod synth;

pub use summary::{
    cell_stats, long_csv, parse_summary_csv, summarize, summary_csv, CellStats, SummaryRow,
};
pub use sweep::{
    estimate_formants, replica_seed, run_sweep, MethodResults, SweepConfig, SweepReport,
};
pub use synth::{synth_vowel, PulseShape, VowelSpec, SYNTH_RMS};
