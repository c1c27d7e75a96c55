use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate weight: block {cluster} of w is zero")]
    DegenerateWeight { cluster: usize },

    #[error("graph generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: usize, reason: String },

    #[error("graph is not connected")]
    Disconnected,

    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("ill-conditioned eigenvector block (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("system is not asymptotically stable: {0}")]
    Instability(String),

    #[error("Krylov iteration did not converge: {converged}/{wanted} eigenpairs, worst residual {residual:.3e}")]
    Convergence {
        wanted: usize,
        converged: usize,
        residual: f64,
    },

    #[error("Hamiltonian has eigenvalues on (or numerically on) the imaginary axis: min |Re| = {min_real:.3e}")]
    SpectralGap { min_real: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("reduced LQR synthesis failed: {0}")]
    SynthesisFailure(String),

    #[error("power iteration fault: objective decreased from {before:.6e} to {after:.6e}")]
    IterationFault { before: f64, after: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix market parse error at line {line}: {reason}")]
    MatrixMarket { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Coarse classification used for CLI exit codes and FFI status codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::Dimension(_)
            | Error::DegenerateWeight { .. }
            | Error::Config(_)
            | Error::MatrixMarket { .. }
            | Error::Disconnected
            | Error::InvalidCertificate(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Argument,
            Error::Instability(_) => ErrorKind::Instability,
            Error::GenerationFailure { .. }
            | Error::NoStabilizingSolution(_)
            | Error::IllConditioned { .. }
            | Error::Convergence { .. }
            | Error::SpectralGap { .. }
            | Error::Numerical(_)
            | Error::SynthesisFailure(_)
            | Error::IterationFault { .. } => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Numerical,
    Instability,
}
