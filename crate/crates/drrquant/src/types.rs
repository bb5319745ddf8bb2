//! Core domain types: CT volumes, binary masks and 2D projection images.
//!
//! Constructors validate the type invariants; a value of one of these types
//! is always internally consistent (grid valid, data length matching, and
//! probability images bounded to [0, 1]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid2, Grid3};

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("invalid grid: dims must be >= 1 and spacing > 0 (got {0:?})")]
    InvalidGrid3(Grid3),
    #[error("invalid grid: dims must be >= 1 and spacing > 0 (got {0:?})")]
    InvalidGrid2(Grid2),
    #[error("data length {actual} does not match grid element count {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("probability image value {value} at pixel {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("projection image value {value} at pixel {index} must be finite and non-negative")]
    InvalidPixel { index: usize, value: f64 },
}

/// 3D scalar grid in Hounsfield Units, the CT input.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid3,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid3, data: Vec<f32>) -> Result<Self, InvariantError> {
        if !grid.is_valid() {
            return Err(InvariantError::InvalidGrid3(grid));
        }
        if data.len() != grid.voxel_count() {
            return Err(InvariantError::DataLength {
                expected: grid.voxel_count(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    /// Volume with every voxel set to `hu`.
    pub fn filled(grid: Grid3, hu: f32) -> Result<Self, InvariantError> {
        let n = grid.voxel_count();
        Self::new(grid, vec![hu; n])
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.grid.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.grid.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Boolean grid sharing a [`Volume`]'s geometry; lung and lesion segmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask3D {
    grid: Grid3,
    data: Vec<bool>,
}

impl BinaryMask3D {
    pub fn new(grid: Grid3, data: Vec<bool>) -> Result<Self, InvariantError> {
        if !grid.is_valid() {
            return Err(InvariantError::InvalidGrid3(grid));
        }
        if data.len() != grid.voxel_count() {
            return Err(InvariantError::DataLength {
                expected: grid.voxel_count(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: Grid3) -> Result<Self, InvariantError> {
        let n = grid.voxel_count();
        Self::new(grid, vec![false; n])
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.grid.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.grid.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn true_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Exact geometry match with a companion volume.
    pub fn matches(&self, volume: &Volume) -> bool {
        self.grid == volume.grid()
    }
}

/// What a 2D scalar image holds; decides binarization modes and the value
/// window used when writing PNG files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageKind {
    #[serde(rename = "drr")]
    Drr,
    #[serde(rename = "thickness-mm")]
    ThicknessMm,
    #[serde(rename = "intensity-integral")]
    IntensityIntegral,
    #[serde(rename = "probability")]
    Probability,
}

impl std::fmt::Display for ImageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ImageKind::Drr => "drr",
            ImageKind::ThicknessMm => "thickness-mm",
            ImageKind::IntensityIntegral => "intensity-integral",
            ImageKind::Probability => "probability",
        };
        f.write_str(s)
    }
}

/// 2D scalar grid with pixel spacing: DRRs, thickness maps, intensity maps
/// and probability maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    grid: Grid2,
    data: Vec<f64>,
    kind: ImageKind,
}

impl ProjectionImage {
    pub fn new(grid: Grid2, data: Vec<f64>, kind: ImageKind) -> Result<Self, InvariantError> {
        if !grid.is_valid() {
            return Err(InvariantError::InvalidGrid2(grid));
        }
        if data.len() != grid.pixel_count() {
            return Err(InvariantError::DataLength {
                expected: grid.pixel_count(),
                actual: data.len(),
            });
        }
        if let Some((index, &value)) =
            data.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(InvariantError::InvalidPixel { index, value });
        }
        if kind == ImageKind::Probability {
            if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| **v > 1.0) {
                return Err(InvariantError::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self { grid, data, kind })
    }

    pub fn filled(grid: Grid2, value: f64, kind: ImageKind) -> Result<Self, InvariantError> {
        let n = grid.pixel_count();
        Self::new(grid, vec![value; n], kind)
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.grid.spacing
    }

    pub fn kind(&self) -> ImageKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, z)]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Boolean grid sharing a [`ProjectionImage`]'s geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask2D {
    grid: Grid2,
    data: Vec<bool>,
}

impl BinaryMask2D {
    pub fn new(grid: Grid2, data: Vec<bool>) -> Result<Self, InvariantError> {
        if !grid.is_valid() {
            return Err(InvariantError::InvalidGrid2(grid));
        }
        if data.len() != grid.pixel_count() {
            return Err(InvariantError::DataLength {
                expected: grid.pixel_count(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: Grid2) -> Result<Self, InvariantError> {
        let n = grid.pixel_count();
        Self::new(grid, vec![false; n])
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.grid.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, z: usize) -> bool {
        self.data[self.grid.index(x, z)]
    }

    pub fn true_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Axis permutation applied after loading, for files whose stored axis
/// order differs from the crate convention (x = left-right, y =
/// anterior-posterior, z = superior-inferior). The string names, for each
/// output axis in x,y,z order, which stored axis supplies it: "xyz" is the
/// identity, "xzy" swaps the stored y and z axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisPerm([usize; 3]);

impl AxisPerm {
    pub const IDENTITY: AxisPerm = AxisPerm([0, 1, 2]);

    pub fn is_identity(&self) -> bool {
        self.0 == [0, 1, 2]
    }
}

impl std::str::FromStr for AxisPerm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axes: Vec<usize> = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'x' => Ok(0),
                'y' => Ok(1),
                'z' => Ok(2),
                other => Err(format!("unknown axis `{other}`")),
            })
            .collect::<Result<_, _>>()?;
        if axes.len() != 3 || !(0..3).all(|k| axes.contains(&k)) {
            return Err(format!("`{s}` is not a permutation of xyz"));
        }
        Ok(AxisPerm([axes[0], axes[1], axes[2]]))
    }
}

fn permute3<T: Copy>(t: (T, T, T), p: &AxisPerm) -> (T, T, T) {
    let arr = [t.0, t.1, t.2];
    (arr[p.0[0]], arr[p.0[1]], arr[p.0[2]])
}

fn permute_data<T: Copy>(grid: Grid3, data: &[T], perm: &AxisPerm) -> (Grid3, Vec<T>) {
    let out_grid = Grid3 {
        dims: permute3(grid.dims, perm),
        spacing: permute3(grid.spacing, perm),
        origin: permute3(grid.origin, perm),
    };
    let (onx, ony, onz) = out_grid.dims;
    let mut out = Vec::with_capacity(data.len());
    for oz in 0..onz {
        for oy in 0..ony {
            for ox in 0..onx {
                let mut src = [0usize; 3];
                src[perm.0[0]] = ox;
                src[perm.0[1]] = oy;
                src[perm.0[2]] = oz;
                out.push(data[grid.index(src[0], src[1], src[2])]);
            }
        }
    }
    (out_grid, out)
}

impl Volume {
    pub fn permuted(&self, perm: AxisPerm) -> Volume {
        if perm.is_identity() {
            return self.clone();
        }
        let (grid, data) = permute_data(self.grid, &self.data, &perm);
        Volume { grid, data }
    }
}

impl BinaryMask3D {
    pub fn permuted(&self, perm: AxisPerm) -> BinaryMask3D {
        if perm.is_identity() {
            return self.clone();
        }
        let (grid, data) = permute_data(self.grid, &self.data, &perm);
        BinaryMask3D { grid, data }
    }
}
