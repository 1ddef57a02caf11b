use thiserror::Error;

/// Errors raised by the sampling, scoring and enumeration routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is out of its admissible range (non-finite θ, k > d, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A structure definition broke its contract (bad partition, non-shrinking map, ...).
    #[error("structure definition error: {0}")]
    StructureDefinition(String),
    /// A trace is not feasible for the instance it is evaluated against.
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    /// The input graph admits no spanning tree / arborescence.
    #[error("infeasible graph: {0}")]
    InfeasibleGraph(String),
    /// Exhaustive enumeration hit its safety cap.
    #[error("instance too large: enumeration reached {reached} traces (cap {cap})")]
    InstanceTooLarge {
        /// Number of traces produced before giving up.
        reached: usize,
        /// The cap in force.
        cap: usize,
    },
    /// Mismatched shapes or otherwise malformed arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The control variate's analytic gradient disagrees with finite differences.
    #[error("invalid control variate: {0}")]
    InvalidControlVariate(String),
}

/// Convenience result type for this crate.
pub type Result<T> = std::result::Result<T, Error>;
