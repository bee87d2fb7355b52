use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("channel `{0}` not found")]
    ChannelNotFound(String),

    #[error("sample-rate mismatch: {0}")]
    SampleRateMismatch(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("annotation overrun: {labels} labels for {epochs} complete epochs")]
    AnnotationOverrun { labels: usize, epochs: usize },

    #[error("recording too short: {samples} samples, need at least {needed}")]
    RecordingTooShort { samples: usize, needed: usize },

    #[error("insufficient beats: {found} usable")]
    InsufficientBeats { found: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty calibration set")]
    EmptyCalibration,

    #[error("accumulator overflow in layer {layer}")]
    AccumulatorOverflow { layer: usize },

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file")]
    Truncated,

    #[error("unsupported technology node {0} nm")]
    UnsupportedNode(u32),

    #[error("missing energy table entry: {0}")]
    MissingTableEntry(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),
}
