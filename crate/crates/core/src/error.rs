use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate rotation: quaternion norm {0:e} is too small to normalize")]
    DegenerateRotation(f64),

    #[error("point is at or behind the camera plane (camera-frame z = {0})")]
    BehindCamera(f64),

    #[error("ambiguous interpolation arc: lighting directions are antipodal; insert an intermediate waypoint")]
    AmbiguousArc,

    #[error("{path}:{line}: {message}")]
    MeshParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("invalid box {0:?}: expected xmin < xmax and ymin < ymax")]
    InvalidBox([f64; 4]),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },

    #[error("input mismatch: {0}")]
    InputMismatch(String),

    #[error("'{0}' is not an imageset (no manifest found)")]
    NotAnImageset(String),

    #[error("imageset '{name}' failed validation:\n  {}", .problems.join("\n  "))]
    InvalidImageset { name: String, problems: Vec<String> },

    #[error("refusing to overwrite existing output at {0}")]
    AlreadyExists(PathBuf),

    #[error("selection is empty after filtering; refusing to write an empty dataset")]
    EmptyDataset,

    #[error("test split would contain every frame ({0} of {0})")]
    AllTest(usize),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid object key '{0}'")]
    InvalidKey(String),

    #[error("transfer failed with HTTP status {status}: {message}")]
    Transfer { status: u16, message: String },

    #[error("transfer failed: {0}")]
    Network(String),

    #[error("model id collision persisted after regeneration: {0}")]
    IdCollision(String),

    #[error("upload incomplete: {0}")]
    Incomplete(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

/// Broad failure classes, used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Storage,
    Internal,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Record { .. }
            | Error::InputMismatch(_)
            | Error::InvalidBox(_)
            | Error::AllTest(_)
            | Error::AmbiguousArc => ErrorClass::Config,
            Error::MeshParse { .. }
            | Error::EmptyMesh
            | Error::NotAnImageset(_)
            | Error::InvalidImageset { .. }
            | Error::AlreadyExists(_)
            | Error::EmptyDataset
            | Error::Io { .. }
            | Error::Image(_)
            | Error::Json(_) => ErrorClass::Io,
            Error::NotFound(_)
            | Error::InvalidKey(_)
            | Error::Transfer { .. }
            | Error::Network(_)
            | Error::IdCollision(_)
            | Error::Incomplete(_) => ErrorClass::Storage,
            Error::DegenerateRotation(_) | Error::BehindCamera(_) | Error::Internal(_) => {
                ErrorClass::Internal
            }
        }
    }
}
