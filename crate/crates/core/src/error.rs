use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: f64, right: f64 },

    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    SignalTooShort { len: usize, window: usize },

    #[error("signal contains a non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(&'static str),

    #[error("decimation ratio {from} Hz -> {to} Hz is not an integer")]
    NonIntegerRatio { from: f64, to: f64 },

    #[error("Levinson-Durbin recursion became singular at stage {stage} (prediction error {error:e})")]
    SingularRecursion { stage: usize, error: f64 },

    #[error("frame is silent (energy {energy:e} below floor {floor:e})")]
    SilentFrame { energy: f64, floor: f64 },

    #[error("all-pole filter is unstable (reflection coefficient {stage} has magnitude {magnitude})")]
    UnstableFilter { stage: usize, magnitude: f64 },

    #[error("displacement {peak_m:e} m exceeds the single-range-bin bound {bound_m:e} m")]
    DisplacementOutOfBin { peak_m: f64, bound_m: f64 },

    #[error("no coherent target: bin {bin} is {ratio_db:.1} dB above the noise floor")]
    NoCoherentTarget { bin: usize, ratio_db: f64 },

    #[error("nothing to transform: no voiced frames among {frames} ({detail})")]
    NothingToTransform { frames: usize, detail: String },

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("differences have zero variance; t statistic undefined")]
    ZeroVariance,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
