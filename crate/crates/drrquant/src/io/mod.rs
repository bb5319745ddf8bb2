//! File formats: MetaImage (.mha / .mhd + .raw) for 3D volumes and masks,
//! 16-bit grayscale PNG with a JSON sidecar for 2D images and masks.
//!
//! All loaders validate the type invariants before returning; no partially
//! valid object ever escapes. Save/load round-trips are bit-exact for 3D
//! data and within 1/65535 of the stored window for 2D scalar images.

mod meta;
mod png2d;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::InvariantError;

pub use meta::{load_mask3d, load_volume, read_volume_geometry, save_mask3d, save_volume};
pub use png2d::{
    load_image2d, load_mask2d, save_image2d, save_mask2d, Sidecar, SIDECAR_DEFAULT_SPACING,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed MetaImage header, key `{key}`: {reason}")]
    HeaderParse { key: String, reason: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("payload integrity: header promises {expected} elements, payload holds {actual}")]
    Integrity { expected: usize, actual: usize },
    #[error("png error on {path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

/// Sidecar path for an image file: the same stem with a `.json` extension,
/// e.g. `drr.png` -> `drr.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("json")
}
