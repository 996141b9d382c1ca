use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or mismatched dimensions.
    #[error("configuration error: {0}")]
    Config(String),

    /// The model does not provide the derivatives an engine needs.
    #[error("model does not supply {needed}; required by {engine}")]
    Capability {
        needed: &'static str,
        engine: &'static str,
    },

    /// Invalid input value (non-finite start, empty sample set, ...).
    #[error("input error: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not a local maximum in coordinate {coordinate} (hessian diagonal {value})")]
    NotLocalMaximum { coordinate: usize, value: f64 },

    #[error("non-finite function value in finite-difference stencil for coordinate {coordinate}")]
    NonFiniteStencil { coordinate: usize },

    #[error("grid too small: log density at the boundary is only {gap:.3} below the maximum (need at least 50)")]
    GridTooSmall { gap: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by
    /// the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Capability { .. } | Error::Input(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_)
        )
    }
}
