use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension error: expected {expected}, got {got}")]
    Dimension { expected: String, got: usize },

    #[error("shape error: {0}")]
    Shape(String),

    /// The requested diffusivity is not resolved on the requested grid.
    #[error("unresolved epsilon {epsilon:e} at N = {resolution}; minimal admissible N is {minimal_resolution}")]
    Unresolved {
        epsilon: f64,
        resolution: usize,
        minimal_resolution: usize,
    },

    #[error("stability error: {0}")]
    Stability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
