//! Runtime errors shared by the solver modules.

use thiserror::Error;

use crate::config::ConfigError;

/// Errors produced by the solvers (as opposed to configuration validation).
#[derive(Debug, Error)]
pub enum SimError {
    /// A slice argument does not match the grid it must conform to.
    #[error("length mismatch for {what}: got {got}, grid requires {want}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        want: usize,
    },

    /// The cumulative-departure curve cannot be inverted at the requested
    /// arrival level. Unreachable for profiles produced by the queue
    /// recursion (arrivals never exceed departures there).
    #[error("cumulative departures never reach the arrival level {level} (boundary {index})")]
    NonInvertible { index: usize, level: f64 },

    /// A payoff passed to the inverse arrival-time map lies outside [-L, 0].
    #[error("payoff {x} outside the representable range [{min}, 0]")]
    PayoffOutOfRange { x: f64, min: f64 },

    /// The initial perturbation is too large for the small-disturbance
    /// linearisation to be meaningful.
    #[error("perturbation {epsilon0} exceeds 0.1 * kappa_c = {limit}")]
    PerturbationTooLarge { epsilon0: f64, limit: f64 },

    /// Configuration validation failure.
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// I/O failure while reading inputs or writing artifacts.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    /// A structured input file (config or departure profile) failed to parse.
    #[error("{0}")]
    Parse(String),
}

impl SimError {
    /// Wraps an I/O error with the path or action that produced it.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            context: context.into(),
            source,
        }
    }
}
