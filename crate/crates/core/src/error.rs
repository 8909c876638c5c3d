use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("empty surface")]
    EmptySurface,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate normalization reference")]
    DegenerateNormalization,
    #[error("adjoint tape already consumed")]
    TapeConsumed,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("open surface")]
    OpenSurface,
    #[error("surface has {0} connected components")]
    Disconnected(usize),
    #[error("no boundary")]
    NoBoundary,
    #[error("velocity blow-up")]
    VelocityBlowUp,
    #[error("missing trajectory: stages were not retained")]
    MissingTrajectory,
    #[error("divergence at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },
    #[error("topology correction failed at τ={tau}")]
    TopologyCorrectionFailed { tau: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::DegenerateNormalization
                | Error::VelocityBlowUp
                | Error::Divergence { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
