//! Crate-wide error type.

use crate::grid::GridIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("world format error at line {line}, column {col}: {msg}")]
    WorldFormat { line: usize, col: usize, msg: String },

    #[error("pose ({x}, {y}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("reference map has no known cells")]
    EmptyReference,

    #[error("cell ({}, {}) is not known-free", cell.row, cell.col)]
    NotFree { cell: GridIndex },

    #[error("sensor pose lies inside an occupied cell ({}, {})", cell.row, cell.col)]
    InObstacle { cell: GridIndex },

    #[error("relay node has no rank in the frontier list")]
    MissingRank,

    #[error("config error: {0}")]
    Config(String),

    #[error("trace format error: {0}")]
    Trace(String),

    #[error("pgm error: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input (config files, world files,
    /// missing paths) as opposed to runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::WorldFormat { .. } | Error::Config(_) | Error::Io(_) | Error::Trace(_)
        )
    }
}
