use thiserror::Error;

use crate::geometry::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid shape {name}: {reason}")]
    InvalidShape { name: String, reason: String },
    #[error("invalid hand parameters: {0}")]
    InvalidParams(String),
    #[error("{side:?} finger angle {q} rad outside joint limits")]
    JointLimit { side: Side, q: f64 },
    #[error("shape catalog: {0}")]
    Catalog(String),
    #[error("unknown shape {0:?}")]
    UnknownShape(String),
    #[error("object is not held by both fingers at this pose")]
    NotHeld,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("mode {0} is not one of 0..=5")]
    InvalidMode(u8),
    #[error("delta {0} deg outside [0, 18.9] deg")]
    DeltaOutOfRange(f64),
    #[error("mode {mode} cannot be executed by the {primitive} primitive")]
    WrongPrimitive { mode: u8, primitive: &'static str },
    #[error("friction state does not match mode {0}")]
    FrictionMismatch(u8),
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("no valid start/goal after {0} attempts")]
    ResetFailed(usize),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NeuroError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors of the binary container formats (datasets and checkpoints).
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Empty(&'static str),
    #[error("{tag} data must come from the {expected} domain, not {found}")]
    DomainMismatch { tag: &'static str, expected: &'static str, found: &'static str },
    #[error("dataset mixes {0}")]
    Mixed(&'static str),
    #[error("invalid trajectory: {0}")]
    Invalid(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("diffusion step {k} outside 1..={steps}")]
    StepOutOfRange { k: usize, steps: usize },
    #[error("the {0} dataset is empty but the preset trains on it")]
    EmptySource(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error(transparent)]
    Data(#[from] DataError),
}
