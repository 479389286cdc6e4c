use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] mixres_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("codec failure: {0}")]
    Codec(#[source] image::ImageError),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{subproblem} training diverged at outer iteration {outer}, step {step} (lr {lr}): non-finite loss")]
    NonFinite {
        outer: u32,
        subproblem: &'static str,
        step: u64,
        lr: f64,
    },

    #[error("outer iteration {outer}: {source}")]
    Round {
        outer: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("sub-problem order violated: {0}")]
    Order(&'static str),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
