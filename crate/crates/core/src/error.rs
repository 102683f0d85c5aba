//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Axis extents of paired objects disagree. Carries the name of the
    /// first inconsistent axis (checked in the order nx, ny, nt, nc).
    #[error("dimension mismatch on axis `{0}`")]
    DimensionMismatch(&'static str),

    #[error("not a KSD1 container (bad magic)")]
    BadMagic,

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("unknown container kind {0}")]
    UnknownKind(u8),

    #[error("container payload truncated")]
    TruncatedPayload,

    #[error("malformed container: {0}")]
    MalformedContainer(String),

    #[error("expected a {expected} container, found {found}")]
    UnexpectedKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid sampling mask: {0}")]
    InvalidMask(String),

    #[error("sampling budget {budget} exceeds grid size {ny}")]
    BudgetExceedsGrid { budget: usize, ny: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown acceleration preset {0}x (known: 4x, 8x, 12x)")]
    UnknownPreset(u32),

    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("too few frames: need at least {min}, got {got}")]
    TooFewFrames { min: usize, got: usize },

    #[error("frame index {index} outside neighborhood range [{lo}, {hi}]")]
    IndexOutOfNeighborhoodRange { index: usize, lo: usize, hi: usize },

    #[error("test frame has zero norm")]
    ZeroNormTestFrame,

    #[error("mask dictionary is empty")]
    EmptyDictionary,

    #[error("reference image has zero norm")]
    ZeroNormReference,

    #[error("roi out of bounds")]
    RoiOutOfBounds,

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("reconstructor `{0}` requires coil sensitivities")]
    MissingSensitivities(&'static str),

    #[error("unknown reconstructor `{0}` (valid: zero_filled, sense_cg, cs_xf, unrolled)")]
    UnknownReconstructor(String),

    #[error("unknown denoiser `{0}` (valid: identity, box, gaussian, soft_threshold)")]
    UnknownDenoiser(String),

    #[error("unknown loss `{0}` (valid: nmse, l2)")]
    UnknownLoss(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
