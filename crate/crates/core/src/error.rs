use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("inconsistent scheme `{name}`: {reason}")]
    InconsistentScheme { name: String, reason: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("operation not supported for scheme kind {0}")]
    UnsupportedKind(String),

    #[error("force is singular at t = {t}: {detail}")]
    ForceSingularity { t: f64, detail: String },

    #[error("collision with primary {body} at t = {t}")]
    CollisionSingularity { t: f64, body: u8 },

    #[error("(t_final - t0) / h = {ratio} is not an integer step count")]
    NonIntegerStepCount { ratio: f64 },

    #[error("eccentricity {0} outside [0, 1)")]
    EccentricityOutOfRange(f64),

    #[error("extrapolation level {0} not supported (expected 2, 3 or 4)")]
    UnsupportedLevel(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
