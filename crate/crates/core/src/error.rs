use thiserror::Error;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    Size(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("spoofed offset of {offset_hz:.1} Hz exceeds the {bound_hz:.1} Hz receiver tolerance")]
    Tolerance { offset_hz: f64, bound_hz: f64 },

    #[error("filter design infeasible: passband ripple {ripple_db:.4} dB exceeds {limit_db} dB")]
    Design { ripple_db: f64, limit_db: f64 },

    #[error("degenerate pilot geometry: {0}")]
    DegenerateGeometry(String),

    #[error("correlation sum is zero, phase undefined")]
    UndefinedPhase,

    #[error("pilot sample {index} has zero magnitude")]
    DivisionGuard { index: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no frame detected: STS correlation {ratio:.3} of energy is below threshold")]
    NoFrame { ratio: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to a different process exit status than input errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::UndefinedPhase | Error::DegenerateGeometry(_) | Error::DivisionGuard { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
