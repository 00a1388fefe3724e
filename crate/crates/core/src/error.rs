use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Zeno decomposition requires a nonzero total coupling.
    #[error("degenerate Zeno decomposition: total coupling is zero")]
    DegenerateDecomposition,

    #[error("tunneling rates differ (J1 = {j1}, J2 = {j2}); symmetric tunneling required")]
    AsymmetricTunneling { j1: f64, j2: f64 },

    #[error("phi({t}) = {phi:e} rad is below the cotangent guard")]
    NearSingularCotangent { t: f64, phi: f64 },

    #[error("Zeno ratio undefined: coupling vanishes on the whole grid")]
    UndefinedZenoRatio,

    #[error("run under-resolved: {quantity} deviation {deviation:e} exceeds {limit:e}")]
    UnderResolved {
        quantity: &'static str,
        deviation: f64,
        limit: f64,
    },

    #[error("no unique steady state: linear system is singular")]
    SingularSteadyState,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
