use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("expected {expected}D geometry, found {found}D")]
    WrongDimension { expected: usize, found: usize },

    #[error("geometry has no faces")]
    EmptyGeometry,

    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },

    #[error("point {point:?} lies outside the binning domain")]
    PointOutsideDomain { point: [f32; 3] },

    #[error("face {face} lies outside the binning domain")]
    FaceOutsideDomain { face: usize },

    #[error(
        "bin indicator capacity exceeded ({needed} slots needed, {capacity} available); \
         raise the bin fraction or the overlap factor"
    )]
    CapacityExceeded { needed: usize, capacity: usize },

    #[error("refinement beyond level {max_level} requested")]
    MaxLevelExceeded { max_level: u8 },

    #[error("invalid root grid dimensions {0:?}")]
    InvalidDims(Vec<usize>),

    #[error(
        "cell-face link capacity exceeded: block {block}, cell {cell} has {count} faces \
         (capacity {capacity})"
    )]
    LinkCapacityExceeded {
        block: u32,
        cell: usize,
        count: usize,
        capacity: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Parse,
    Capacity,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } => ErrorKind::Parse,
            Error::CapacityExceeded { .. } | Error::LinkCapacityExceeded { .. } => {
                ErrorKind::Capacity
            }
            Error::Io { .. } => ErrorKind::Io,
            Error::InvalidParameter(_)
            | Error::WrongDimension { .. }
            | Error::EmptyGeometry
            | Error::DegenerateFace { .. }
            | Error::PointOutsideDomain { .. }
            | Error::FaceOutsideDomain { .. }
            | Error::MaxLevelExceeded { .. }
            | Error::InvalidDims(_) => ErrorKind::Config,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
