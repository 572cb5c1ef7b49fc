use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmfError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or matrix shapes disagree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine did not reach the requested accuracy.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        /// Best estimate available when the routine gave up.
        partial: Option<f64>,
    },

    /// The data admit no finite maximum-likelihood estimate.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The mean resultant length is so close to one that the concentration
    /// estimate is unbounded.
    #[error("concentration overflow: mean resultant length {resultant} is too close to 1")]
    ConcentrationOverflow { resultant: f64 },

    /// The rejection sampler ran out of proposals.
    #[error(
        "sampling failure after {proposals} proposals ({accepted} accepted, acceptance rate {acceptance_rate:.3e})"
    )]
    SamplingFailure {
        proposals: u64,
        accepted: u64,
        acceptance_rate: f64,
    },

    /// Stochastic optimisation produced a non-finite objective.
    #[error("divergence at epoch {epoch} (learning rate {lr:e})")]
    Divergence { epoch: usize, lr: f64 },

    /// A mixture component lost all of its mass and could not be reseeded.
    #[error("component {component} collapsed after {reseeds} reseeds")]
    ComponentCollapse { component: usize, reseeds: usize },
}

impl VmfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VmfError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, partial: Option<f64>) -> Self {
        VmfError::Numerical {
            message: msg.into(),
            partial,
        }
    }

    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            VmfError::InvalidArgument(_) | VmfError::DimensionMismatch { .. } | VmfError::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, VmfError>;
