use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("transmission {0} outside [0, 1]")]
    InvalidLoss(f64),

    #[error("amplifier gain {0} must satisfy G >= 1")]
    InvalidGain(f64),

    #[error("beam splitter requires T + R = 1 with T, R in [0, 1], got T = {t}, R = {r}")]
    InvalidSplit { t: f64, r: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("signal slope vanishes at phi = {phi}; sensitivity undefined here")]
    ZeroSlope { phi: f64 },

    #[error("Fisher information {0} is not positive")]
    NonpositiveFisher(f64),

    #[error("total photon number is zero; shot-noise reference undefined")]
    ZeroPhotons,

    #[error("pump phases must be theta1 = 0, theta2 = pi for this observable")]
    UnsupportedPhaseConfig,

    #[error("no gain G2 >= 1 improves readout at loss ratio {ratio}")]
    NoValidGain { ratio: f64 },

    #[error("every grid point diverged; nothing to report")]
    AllDivergent,

    #[error("number-state truncation overflow: leakage {leakage:.3e} exceeds bound")]
    TruncationOverflow { leakage: f64 },

    #[error("state norm {0} is not 1 within tolerance")]
    Unnormalized(f64),

    #[error("{0}")]
    Usage(String),

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
