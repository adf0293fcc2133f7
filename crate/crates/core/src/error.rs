use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The closest point of a wall lies within [`crate::EPS_DEGENERATE`] of the
    /// frame origin, so the line direction is undefined.
    #[error("degenerate wall: closest point {0:e} m from the frame origin")]
    DegenerateWall(f64),

    #[error("covariance is not positive semi-definite (min eigenvalue {0:e})")]
    NotPositiveSemiDefinite(f64),

    #[error("measurement noise is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("singular covariance in likelihood evaluation")]
    SingularCovariance,

    /// Covariance update produced an eigenvalue below the failure tolerance.
    /// Usually a mis-tuned measurement noise or a degenerate Jacobian.
    #[error("covariance update lost positive semi-definiteness (min eigenvalue {0:e})")]
    NumericalFailure(f64),

    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },

    #[error("scan row has no samples")]
    EmptyRow,

    #[error("unknown landmark id {0}")]
    UnknownLandmark(u64),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(&'static str),

    #[error("invalid environment: segment {index} {reason}")]
    InvalidEnvironment { index: usize, reason: &'static str },
}
