use std::fmt;

use thiserror::Error;

/// Pipeline stage an error originated from, used by [`Error::Stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validation,
    Segmentation,
    Budget,
    Selection,
    Merging,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Validation => "validation",
            Stage::Segmentation => "segmentation",
            Stage::Budget => "budget",
            Stage::Selection => "selection",
            Stage::Merging => "merging",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, got {actual}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in `{array}` at flat index {index}")]
    NonFinite { array: &'static str, index: usize },

    #[error("degenerate feature: {what} #{index} has zero norm")]
    DegenerateFeature { what: &'static str, index: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported pooling: {in_h}x{in_w} cannot be pooled to {out_h}x{out_w}")]
    UnsupportedPooling {
        in_h: usize,
        in_w: usize,
        out_h: usize,
        out_w: usize,
    },

    #[error("budget overflow: requested {requested} tokens but only {available} are available")]
    BudgetOverflow { requested: usize, available: usize },

    #[error("budget underflow: segment {segment} receives zero tokens; increase the retention ratio")]
    BudgetUnderflow { segment: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("attention maps are required but absent from the dump")]
    MissingAttention,

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("header dimensions overflow addressable size")]
    DimensionOverflow,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping stage attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
