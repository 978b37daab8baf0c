use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A geometric or linear-algebra quantity left its valid domain
    /// (non-positive box extent, non-PSD covariance, singular innovation).
    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("detection {index} carries no appearance embedding")]
    MissingFeature { index: usize },

    #[error("frame {got} is not after the previously processed frame {previous}")]
    Sequencing { previous: u32, got: u32 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("input format error: {0}")]
    InputFormat(String),

    #[error("{}: bad embedding file: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: embedding record {record}: {message}", path.display())]
    Data {
        path: PathBuf,
        record: usize,
        message: String,
    },

    #[error("config line {line}: key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("ground truth contains no evaluated objects")]
    EmptyGroundTruth,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
