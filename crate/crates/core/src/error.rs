use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Agent indices are zero-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop on agent {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),

    #[error("edge {{{a}, {b}}} has non-positive weight {weight}")]
    NonPositiveWeight { a: usize, b: usize, weight: f64 },

    #[error("graph is not connected")]
    NotConnected,

    #[error("offset for ({j}, {i}) does not correspond to a graph edge")]
    OffsetOnNonEdge { j: usize, i: usize },

    #[error("no desired offset given for edge {{{a}, {b}}}")]
    MissingOffset { a: usize, b: usize },

    #[error("offsets for ({j}, {i}) are not antisymmetric: {forward} vs {backward}")]
    NotAntisymmetric {
        j: usize,
        i: usize,
        forward: f64,
        backward: f64,
    },

    #[error("offsets are not realizable: edge ({j}, {i}) has residual {residual:e}")]
    NotRealizable { j: usize, i: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is indefinite")]
    Indefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("disturbance key ({j}, {i}) is not a directed graph edge")]
    DisturbanceOnNonEdge { j: usize, i: usize },

    #[error("state diverged at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    #[error("detection window {window} s exceeds trajectory duration {duration} s")]
    WindowTooLong { window: f64, duration: f64 },

    #[error("too few samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("trajectory has not converged")]
    NotConverged,

    #[error("graph is not a chain")]
    NotAChain,

    #[error("synthesized velocity violates the sign condition at step {step}, coordinate {index}")]
    SignInvariant { step: usize, index: usize },

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),
}
