use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant. `field` names the offending
    /// parameter or scenario key.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    /// A scenario, outline or pattern file could not be parsed.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Rejection sampling gave up before placing every robot.
    #[error("could not place {requested} robots with separation {min_sep} m after {attempts} attempts; use a larger box")]
    Placement {
        requested: usize,
        min_sep: f64,
        attempts: usize,
    },

    /// Rasterization produced no cells.
    #[error("pattern is empty: no lattice cell center falls inside the outline at cell size {cell_size}")]
    EmptyPattern { cell_size: f64 },

    /// A NaN or infinity appeared while simulating.
    #[error("numeric fault at step {step}: {message}")]
    Numeric { step: usize, message: String },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
