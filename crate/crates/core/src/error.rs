use thiserror::Error;

/// Errors raised by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("ambiguous computational basis: state {label} has best population {population:.4}")]
    AmbiguousBasis { label: String, population: f64 },

    #[error("no idling point: {0}")]
    NoIdlingPoint(String),

    #[error("singular denominator: {0}")]
    SingularDenominator(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("integration accuracy: {0}")]
    Integration(String),

    #[error("non-physical process: {0}")]
    NonPhysical(String),

    #[error("tuning range: {0}")]
    TuningRange(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("calibration failed: {message} (best A/2pi = {best_amplitude_ghz:.6} GHz, tau_c = {best_tau_c_ns:.3} ns, infidelity = {best_infidelity:.3e})")]
    Calibration {
        message: String,
        best_amplitude_ghz: f64,
        best_tau_c_ns: f64,
        best_infidelity: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 validation, 3 numerical convergence, 4 calibration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AmbiguousBasis { .. }
            | Error::NoIdlingPoint(_)
            | Error::Integration(_)
            | Error::Convergence(_)
            | Error::Internal(_) => 3,
            Error::Calibration { .. } => 4,
            _ => 2,
        }
    }
}
