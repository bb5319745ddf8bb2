//! CT-to-DRR projection and airspace-disease quantification.
//!
//! The pipeline: synthesize DRRs from CT volumes by parallel-projection
//! line integrals along the anteroposterior axis, project 3D lung/lesion
//! masks into 2D thickness or intensity maps, binarize them at calibrated
//! cutoffs, compute volume- and area-based severity percentages (POv,
//! POa), and evaluate agreement with bootstrap MAE/Pearson intervals and
//! paired one-tailed t-tests.
//!
//! Synthetic phantoms with analytically known POv provide the verification
//! substrate; see [`phantom`].

pub mod drr;
pub mod grid;
pub mod io;
pub mod maskproj;
pub mod phantom;
pub mod quant;
pub mod report;
pub mod stats;
pub mod types;

pub use grid::{Grid2, Grid3};
pub use types::{AxisPerm, BinaryMask2D, BinaryMask3D, ImageKind, ProjectionImage, Volume};
