use thiserror::Error;

use crate::radio::{Command, RadioMode};

/// Errors raised while building, parsing or checking a frame.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the 32-byte limit")]
    InvalidPayload(usize),
    #[error("address is {got} bytes, configured width is {expected}")]
    AddressWidth { expected: usize, got: usize },
    #[error("pid {0} does not fit in 2 bits")]
    InvalidPid(u8),
    #[error("frame check failed")]
    CrcFailure,
    #[error("malformed frame: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] FrameError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("protocol violation: command {command:?} is not legal in mode {mode:?}")]
    ProtocolViolation { mode: RadioMode, command: Command },

    #[error("tx fifo full")]
    FifoFull,

    #[error("infeasible duty-cycle profile: active time {active_s} s exceeds period {period_s} s")]
    InfeasibleProfile { active_s: f64, period_s: f64 },

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
