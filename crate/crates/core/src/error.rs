use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Parameters or shapes that cannot describe a valid run.
    #[error("configuration error: {0}")]
    Config(String),

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    /// The dense engine refuses chains longer than its cap.
    #[error("chain length {n} exceeds the dense cap of {max}; use the fermion engine (J0 = 0 RWA runs)")]
    Capacity { n: usize, max: usize },

    /// A quantity that must be physical (PSD, bounded) came out inconsistent.
    #[error("numerical consistency violated: {0}")]
    Numerical(String),

    /// Malformed user input to an evaluation routine.
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
