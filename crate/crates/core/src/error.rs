use thiserror::Error;

use crate::machine::CfsmViolation;
use crate::model::{Participant, StateId};
use crate::semantics::SystemViolation;

pub type Result<T> = std::result::Result<T, Error>;

/// Position of a token in a system file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {0:?}: expected letters, digits, underscore, or apostrophe")]
    InvalidToken(String),

    #[error("label names {0} as both sender and receiver")]
    SelfCommunication(Participant),

    #[error("unknown state {0}")]
    UnknownState(StateId),

    #[error("unknown participant {0}")]
    UnknownParticipant(Participant),

    #[error("transition endpoint {0} is not a state of the automaton")]
    DanglingEndpoint(StateId),

    #[error("initial state {0} is not a state of the automaton")]
    DanglingInitial(StateId),

    #[error("machine {subject} is not a valid asymmetric machine:\n{}", render_lines(.violations))]
    MachineInvalid {
        subject: Participant,
        violations: Vec<CfsmViolation>,
    },

    #[error("system is not well formed:\n{}", render_lines(.0))]
    SystemInvalid(Vec<SystemViolation>),

    #[error("machine {subject} cannot be normalized: {reason}")]
    NormalizePrecondition { subject: Participant, reason: String },

    #[error("configuration does not belong to this system: {0}")]
    ForeignConfiguration(String),

    #[error("state space exceeds the configured limit of {limit} configurations")]
    StateExplosion { limit: usize },

    #[error("parse error at {pos}: {message}")]
    Parse { pos: Pos, message: String },

    #[error("domains overlap: {} appears in both systems", .0)]
    OverlappingDomains(Participant),

    #[error("systems are not composable:\n{}", render_lines(.reasons))]
    NotComposable { reasons: Vec<String> },

    #[error("cannot build a gateway from {subject} towards {peer}: {reason}")]
    PeerNameClash {
        subject: Participant,
        peer: Participant,
        reason: String,
    },

    #[error("cannot derive a compatible peer: {0}")]
    PeerDerivation(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("invalid fuzz parameters: {0}")]
    InvalidFuzzParams(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn render_lines<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
