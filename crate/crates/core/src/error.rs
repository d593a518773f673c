use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The requested gain role does not exist under the given protocol.
    #[error("gain role `{role}` is not defined for protocol `{protocol}`")]
    ProtocolMismatch {
        protocol: &'static str,
        role: &'static str,
    },

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best estimate {best_estimate:e}, error estimate {est_abs_error:e})"
    )]
    Quadrature {
        best_estimate: f64,
        est_abs_error: f64,
        subdivisions: usize,
    },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable category, used on the CLI error stream.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::ProtocolMismatch { .. } => "protocol-mismatch",
            Error::Quadrature { .. } => "quadrature",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status for this error category. Status 2 is left to clap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 3,
            Error::InvalidParameter { .. } => 4,
            Error::ProtocolMismatch { .. } => 5,
            Error::Quadrature { .. } => 6,
            Error::Io(_) => 7,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
