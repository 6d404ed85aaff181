use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,
    #[error("degenerate energy: {0} is silent, SNR undefined")]
    DegenerateEnergy(&'static str),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("length mismatch: signal has {signal} samples, noise has {noise}")]
    LengthMismatch { signal: usize, noise: usize },
    #[error("sample rate mismatch: {signal} Hz vs {noise} Hz")]
    RateMismatch { signal: u32, noise: u32 },
    #[error("segment of {segment} samples is longer than the noise pool ({pool} samples)")]
    SegmentTooLong { segment: usize, pool: usize },
    #[error("invalid noise spec: {0}")]
    NoiseSpec(&'static str),
    #[error("signal of {samples} samples is shorter than one {frame}-sample frame")]
    TooShort { samples: usize, frame: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("need at least 2 frames to fit normalization statistics, got {0}")]
    InsufficientFrames(usize),
    #[error("SNR grid is empty")]
    EmptyGrid,
    #[error("invalid SNR grid: {0}")]
    InvalidGrid(String),
    #[error("infeasible CTC target: {frames} frames cannot emit {required} label steps")]
    Infeasible { frames: usize, required: usize },
    #[error("label index {0} outside the alphabet")]
    LabelOutOfRange(usize),
    #[error("empty reference transcript")]
    EmptyReference,
    #[error("missing conditions: {}", .0.join(", "))]
    MissingConditions(Vec<String>),
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("utterance {id}: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite loss at epoch {epoch}, utterance {utterance}")]
    NonFiniteLoss { epoch: usize, utterance: String },
    #[error("epoch generation pipeline stopped: {0}")]
    Pipeline(String),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_utterance(self, id: &str) -> Self {
        Error::Utterance {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
