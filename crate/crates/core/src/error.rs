use thiserror::Error;

/// Errors raised by the exponential-family and mixture-learning layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the natural or moment space.
    #[error("{family}: {space} parameter out of domain: {constraint}")]
    Domain {
        family: String,
        space: &'static str,
        constraint: String,
    },

    /// An observation is not in the support of the family.
    #[error("{family}: observation {index} outside support: {constraint}")]
    Support {
        family: String,
        index: usize,
        constraint: String,
    },

    /// An estimate collapsed onto the boundary of the moment space
    /// (for instance a singular covariance matrix).
    #[error("degenerate estimate for {context}: {detail}")]
    Degenerate { context: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("center {0} is inactive")]
    InactiveCenter(usize),

    #[error("no active centers")]
    NoActiveCenters,

    #[error("need {needed} distinct statistic points, found {found}")]
    NotEnoughDistinct { needed: usize, found: usize },

    #[error("numeric gradient inversion did not converge after {0} iterations")]
    NoConvergence(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(family: &str, space: &'static str, constraint: impl Into<String>) -> Self {
        Error::Domain {
            family: family.to_string(),
            space,
            constraint: constraint.into(),
        }
    }

    pub(crate) fn degenerate(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Degenerate {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// True for errors that stem from a degenerate estimate rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate { .. } | Error::NotEnoughDistinct { .. })
    }
}
