use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Echo timestamp precedes the transmit timestamp.
    #[error("invalid time-of-flight interval: echo at {t_echo} s precedes transmit at {t_transmit} s")]
    InvalidInterval { t_transmit: f64, t_echo: f64 },

    /// Azimuth at or beyond ±π/2, where the tangent-plane projection blows up.
    #[error("azimuth singularity: |{name}| = {value} rad is not below π/2")]
    Singularity { name: &'static str, value: f64 },

    /// Cartesian point with z ≤ 0 cannot be expressed in the sensor's polar model.
    #[error("point behind sensor: z = {z} must be positive")]
    BehindSensor { z: f64 },

    /// A domain-type invariant was violated; names the offending field.
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },

    /// Reshape hypothesis (m, k) incompatible with the frame length.
    #[error("hypothesis out of range: m={m}, k={k} for frame of {len} pulses")]
    HypothesisOutOfRange { m: usize, k: usize, len: usize },

    /// A cost was requested on a grid with no valid sample pairs.
    #[error("no signal: grid contains no valid pairs to score")]
    NoSignal,

    /// Every (m, k) cell of the search grid was inadmissible.
    #[error("calibration failed: no admissible cell in the (m, k) search grid")]
    CalibrationFailed,

    /// Fewer than two frames survived per-frame calibration.
    #[error("drift estimation failed: {surviving} of {total} frames calibrated, need at least 2")]
    DriftEstimationFailed { surviving: usize, total: usize },

    /// Config document could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Malformed data file row.
    #[error("{path}:{line}: {reason}")]
    DataParse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
