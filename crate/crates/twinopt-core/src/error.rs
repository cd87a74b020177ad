use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on inputs was violated (dimensions, signs, ranges).
    #[error("{0}")]
    Validation(String),

    /// The requested combination of cost structure and constraint set has no
    /// exact solve path; `brute_force_argmin` remains available.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The damped sweep is blowing up instead of settling.
    #[error(
        "sweep diverged: control update norm grew from {from:.3e} to {to:.3e} \
         over 50 iterations ({iterations} updates recorded)"
    )]
    SweepDiverged { iterations: usize, from: f64, to: f64 },

    /// The plant/model fixed-point iteration did not settle.
    #[error(
        "coupled run did not converge within {iterations} outer iterations; \
         last two plant-trajectory changes were {previous_change:.3e} and {last_change:.3e}"
    )]
    OuterLoopStalled {
        iterations: usize,
        previous_change: f64,
        last_change: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
