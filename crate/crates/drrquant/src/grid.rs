//! Voxel/pixel grid geometry shared by volumes, masks and projection images.
//!
//! Axis convention is fixed across the crate: x = left-right, y =
//! anterior-posterior (the projection axis), z = superior-inferior.
//! 3D data is stored row-major with x fastest: `idx = x + nx*(y + ny*z)`.
//! 2D data drops the y axis: `idx = x + nx*z`.

use serde::{Deserialize, Serialize};

/// Geometry of a 3D voxel grid: dimensions, physical spacing (mm/voxel)
/// and physical origin (mm). Equality is exact, which is what mask/volume
/// pairing checks rely on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub origin: (f64, f64, f64),
}

impl Grid3 {
    pub fn new(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> Self {
        Self { dims, spacing, origin: (0.0, 0.0, 0.0) }
    }

    pub fn with_origin(mut self, origin: (f64, f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    /// True when all dims are >= 1 and all spacings are strictly positive.
    pub fn is_valid(&self) -> bool {
        self.dims.0 >= 1
            && self.dims.1 >= 1
            && self.dims.2 >= 1
            && self.spacing.0 > 0.0
            && self.spacing.1 > 0.0
            && self.spacing.2 > 0.0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims.0 && y < self.dims.1 && z < self.dims.2);
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    /// Physical position of the center of voxel (x, y, z), in mm.
    #[inline]
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> (f64, f64, f64) {
        (
            self.origin.0 + (x as f64 + 0.5) * self.spacing.0,
            self.origin.1 + (y as f64 + 0.5) * self.spacing.1,
            self.origin.2 + (z as f64 + 0.5) * self.spacing.2,
        )
    }

    /// Physical extent (nx*sx, ny*sy, nz*sz) in mm.
    pub fn extent(&self) -> (f64, f64, f64) {
        (
            self.dims.0 as f64 * self.spacing.0,
            self.dims.1 as f64 * self.spacing.1,
            self.dims.2 as f64 * self.spacing.2,
        )
    }

    /// The 2D grid obtained by projecting along the y (anterior-posterior) axis.
    pub fn projected(&self) -> Grid2 {
        Grid2 {
            dims: (self.dims.0, self.dims.2),
            spacing: (self.spacing.0, self.spacing.2),
        }
    }
}

/// Geometry of a 2D pixel grid (projection images and 2D masks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub dims: (usize, usize),
    pub spacing: (f64, f64),
}

impl Grid2 {
    pub fn new(dims: (usize, usize), spacing: (f64, f64)) -> Self {
        Self { dims, spacing }
    }

    pub fn pixel_count(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn is_valid(&self) -> bool {
        self.dims.0 >= 1 && self.dims.1 >= 1 && self.spacing.0 > 0.0 && self.spacing.1 > 0.0
    }

    #[inline]
    pub fn index(&self, x: usize, z: usize) -> usize {
        debug_assert!(x < self.dims.0 && z < self.dims.1);
        x + self.dims.0 * z
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.dims.0 as f64 * self.spacing.0, self.dims.1 as f64 * self.spacing.1)
    }
}
