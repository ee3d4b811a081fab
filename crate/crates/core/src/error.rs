use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// A scenario field failed validation. `field` names the offending key
    /// as it appears in scenario files.
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },

    #[error("allocation has {found} entries, scenario has {expected} users")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    #[error("solver diverged: rho[{index}] = {rho} exceeds cap {cap}")]
    Divergence { index: usize, rho: f64, cap: f64 },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("scenario generation failed: {0}")]
    Generation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
