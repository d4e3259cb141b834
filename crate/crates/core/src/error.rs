use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(&'static str),

    #[error("unexpected end of bit stream")]
    UnexpectedEof,

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("bad stream header: {0}")]
    Header(String),

    #[error("unsupported stream version {0}")]
    Version(u8),

    #[error("estimator has not seen any symbols yet")]
    EstimatorCold,

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
