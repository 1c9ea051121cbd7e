use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate normal ({:.4}, {:.4}, {:.4}): {reason}", normal.x, normal.y, normal.z)]
    DegenerateNormal { normal: Vec3, reason: &'static str },

    #[error("zero-length or non-finite normal vector")]
    ZeroNormal,

    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(&'static str),

    #[error("projective point at infinity")]
    PointAtInfinity,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("bad magic {0:?}, expected \"NRM1\"")]
    BadMagic([u8; 4]),

    #[error("truncated normal file: expected {expected} bytes, got {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("region of interest selects no pixels")]
    EmptyRoi,

    #[error("normals inside the region are too diverse for a single plane (mean magnitude {magnitude:.4})")]
    IncoherentNormals { magnitude: f64 },

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },

    #[error("unsupported character {0:?}")]
    UnsupportedCharacter(char),

    #[error("region too small: font height {height:.2} px is below 4 px")]
    RoiTooSmall { height: f64 },

    #[error("singular affine transform (|det| = {det:e})")]
    SingularAffine { det: f64 },

    #[error("malformed rating record at row {row}: {message}")]
    MalformedRecord { row: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("character box {index}: {source}")]
    AtBox {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn at_box(index: usize, err: Error) -> Self {
        Error::AtBox {
            index,
            source: Box::new(err),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Error with any `AtBox` wrapping removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtBox { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by the surface geometry rather than the input format.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateNormal { .. }
                | Error::IncoherentNormals { .. }
                | Error::DegenerateQuad(_)
                | Error::PointAtInfinity
        )
    }

    pub fn is_io(&self) -> bool {
        match self.root() {
            Error::Io { .. } => true,
            Error::Image { source, .. } => matches!(source, image::ImageError::IoError(_)),
            _ => false,
        }
    }
}
