use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point sits at or behind the camera plane.
    #[error("point {point} has depth {depth} <= epsilon in view {view}")]
    Depth { view: usize, point: usize, depth: f64 },

    #[error("silhouette has zero area")]
    EmptySilhouette,

    #[error("rejection sampler gave up after {rejections} rejections ({accepted} of {requested} accepted)")]
    NonTermination {
        rejections: usize,
        accepted: usize,
        requested: usize,
    },

    #[error("point set is empty")]
    EmptySet,

    #[error("requested {k} neighbors from a set of {available}")]
    KTooLarge { k: usize, available: usize },

    #[error("voxel grids differ in resolution or bounds")]
    ShapeMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("depth failure at step {step}: {source}")]
    Diverged {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
