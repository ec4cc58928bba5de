use std::path::PathBuf;

/// Errors produced by the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("cannot read WAV file {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("audio contains no samples")]
    EmptyAudio,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("unvoiced/aperiodic input")]
    Unvoiced,

    #[error("template window [{start}, {end}) out of range for {frames} frames")]
    TemplateOutOfRange {
        start: usize,
        end: usize,
        frames: usize,
    },

    #[error("no pulses found")]
    NoPulses,

    #[error("no usable slices to average")]
    NoSlices,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
