use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("undersampled pulse: symbol rate {symbol_rate} Hz with roll-off {rolloff} needs more than {sample_rate} Hz")]
    Undersampled {
        symbol_rate: f64,
        rolloff: f64,
        sample_rate: f64,
    },

    #[error("non-finite field after propagation ({0})")]
    NonFinite(String),

    #[error("target GMI {target} bit/2D is infeasible: {detail}")]
    Infeasible { target: f64, detail: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
