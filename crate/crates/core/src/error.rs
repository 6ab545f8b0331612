use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeoError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The base point is off the constraint set.
    #[error("precondition violated: max |phi| = {max_violation:e} at constraint {edge:?}")]
    Infeasible {
        max_violation: f64,
        /// `(i, j, k)`, 1-based as in configs and reports.
        edge: (usize, usize, usize),
    },

    #[error("initial state violates the constrained manifold: {0}")]
    InfeasibleInitialState(String),

    #[error("singular constraint system (condition number {condition:e}): {reason}")]
    SingularConstraint { condition: f64, reason: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<GeoError>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl GeoError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GeoError::InvalidArgument(msg.into())
    }

    /// Strips step context.
    pub fn root(&self) -> &GeoError {
        match self {
            GeoError::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
