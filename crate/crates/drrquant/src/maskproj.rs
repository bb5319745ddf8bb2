//! Projection of 3D masks into 2D thickness/intensity maps, binarization
//! at calibrated cutoffs, and the swipe-search cutoff calibration that
//! minimizes the mean |POa - POv| over a training set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drr::DrrConfig;
use crate::quant::{self, QuantError};
use crate::types::{BinaryMask2D, BinaryMask3D, ImageKind, InvariantError, ProjectionImage, Volume};

/// Thickness cutoff (mm) used to binarize projected lung masks.
pub const DEFAULT_LUNG_CUTOFF_MM: f64 = 38.0;

/// Intensity cutoff for pipelines whose line integrals use raw CT values
/// (no HU shift, per-voxel rather than per-mm scaling). Kept for
/// compatibility only: this crate's intensity integrals use the
/// attenuation-per-mm convention, so the default intensity cutoff should
/// come from [`calibrate_cutoff`] instead.
pub const LEGACY_INTENSITY_CUTOFF: f64 = 25_000.0;

#[derive(Debug, Error)]
pub enum MaskProjError {
    #[error("volume and mask geometries differ")]
    GeometryMismatch,
    #[error("cutoff must be >= 0, got {0}")]
    NegativeCutoff(f64),
    #[error("image kind {kind} does not match cutoff mode {mode:?}")]
    KindModeMismatch { kind: ImageKind, mode: CutoffMode },
    #[error("calibration dataset is empty")]
    EmptyDataset,
    #[error("bad cutoff grid: {0}")]
    BadGrid(String),
    #[error("calibration case {index}: {source}")]
    Case {
        index: usize,
        #[source]
        source: QuantError,
    },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffMode {
    Thickness,
    Intensity,
}

impl CutoffMode {
    fn image_kind(self) -> ImageKind {
        match self {
            CutoffMode::Thickness => ImageKind::ThicknessMm,
            CutoffMode::Intensity => ImageKind::IntensityIntegral,
        }
    }
}

/// Binarization cutoff for a projected mask map. `cutoff` is mm for
/// thickness maps and attenuation*mm integral units for intensity maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub mode: CutoffMode,
    pub cutoff: f64,
    #[serde(default = "default_inclusive")]
    pub inclusive: bool,
}

fn default_inclusive() -> bool {
    true
}

impl CutoffConfig {
    pub fn new(mode: CutoffMode, cutoff: f64) -> Result<Self, MaskProjError> {
        if cutoff < 0.0 {
            return Err(MaskProjError::NegativeCutoff(cutoff));
        }
        Ok(Self { mode, cutoff, inclusive: true })
    }

    pub fn validate(&self) -> Result<(), MaskProjError> {
        if self.cutoff < 0.0 {
            return Err(MaskProjError::NegativeCutoff(self.cutoff));
        }
        Ok(())
    }
}

/// Thickness map: pixel (x,z) = (count of true voxels along y) * sy, in mm.
pub fn thickness_projection(mask: &BinaryMask3D) -> ProjectionImage {
    let (nx, ny, nz) = mask.dims();
    let (_, sy, _) = mask.spacing();
    let data = mask.data();

    let mut out = vec![0.0f64; nx * nz];
    for z in 0..nz {
        let out_row = &mut out[z * nx..(z + 1) * nx];
        for y in 0..ny {
            let row = &data[nx * (y + ny * z)..nx * (y + ny * z) + nx];
            for (acc, &b) in out_row.iter_mut().zip(row) {
                *acc += b as u8 as f64;
            }
        }
    }
    for v in &mut out {
        *v *= sy;
    }

    ProjectionImage::new(mask.grid().projected(), out, ImageKind::ThicknessMm)
        .expect("projection of a valid mask is valid")
}

/// Intensity map: pixel (x,z) = sum over masked y of a(v[x,y,z]) * sy, using
/// the same attenuation mapping as the DRR projection.
pub fn intensity_projection(
    volume: &Volume,
    mask: &BinaryMask3D,
    cfg: &DrrConfig,
) -> Result<ProjectionImage, MaskProjError> {
    if !mask.matches(volume) {
        return Err(MaskProjError::GeometryMismatch);
    }
    let (nx, ny, nz) = volume.dims();
    let (_, sy, _) = volume.spacing();
    let hu = volume.data();
    let sel = mask.data();

    let mut out = vec![0.0f64; nx * nz];
    for z in 0..nz {
        let out_row = &mut out[z * nx..(z + 1) * nx];
        for y in 0..ny {
            let base = nx * (y + ny * z);
            let hu_row = &hu[base..base + nx];
            let sel_row = &sel[base..base + nx];
            for ((acc, &h), &m) in out_row.iter_mut().zip(hu_row).zip(sel_row) {
                if m {
                    *acc += cfg.attenuation(f64::from(h)) * sy;
                }
            }
        }
    }

    Ok(ProjectionImage::new(
        volume.grid().projected(),
        out,
        ImageKind::IntensityIntegral,
    )?)
}

/// Binarizes a projected map: pixel true iff value >= cutoff (or > cutoff
/// when `inclusive` is false). The image kind must match the cutoff mode.
pub fn binarize_map(
    img: &ProjectionImage,
    cfg: &CutoffConfig,
) -> Result<BinaryMask2D, MaskProjError> {
    cfg.validate()?;
    if img.kind() != cfg.mode.image_kind() {
        return Err(MaskProjError::KindModeMismatch { kind: img.kind(), mode: cfg.mode });
    }
    let data: Vec<bool> = img
        .data()
        .iter()
        .map(|&v| if cfg.inclusive { v >= cfg.cutoff } else { v > cfg.cutoff })
        .collect();
    Ok(BinaryMask2D::new(img.grid(), data)?)
}

/// Search grid for cutoff calibration: lo, lo+step, ..., up to hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl CutoffGrid {
    pub fn values(&self) -> Result<Vec<f64>, MaskProjError> {
        if self.step.is_nan() || self.step <= 0.0 {
            return Err(MaskProjError::BadGrid(format!("step {} must be > 0", self.step)));
        }
        if self.lo > self.hi {
            return Err(MaskProjError::BadGrid(format!("lo {} > hi {}", self.lo, self.hi)));
        }
        if self.lo < 0.0 {
            return Err(MaskProjError::NegativeCutoff(self.lo));
        }
        // the 1e-9 slack keeps hi on the grid despite accumulated rounding
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

/// One training case for calibration.
pub struct CalibrationCase<'a> {
    pub volume: &'a Volume,
    pub lung: &'a BinaryMask3D,
    pub lesion: &'a BinaryMask3D,
}

/// Swipe-search result: the minimizing cutoff (smallest grid value on
/// ties) and the full (cutoff, mean-MAE) curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mode: CutoffMode,
    pub best_cutoff: f64,
    pub best_mae: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Exhaustive cutoff search: for every grid value, binarize each case's
/// lesion map at that cutoff (the lung map stays binarized at
/// `lung_cutoff_mm`), compute POa, and average |POa - POv| over cases.
///
/// Projections and POv are computed once per case; only the binarization
/// and the count ratio vary with the candidate cutoff.
pub fn calibrate_cutoff(
    cases: &[CalibrationCase<'_>],
    mode: CutoffMode,
    grid: &CutoffGrid,
    drr_cfg: &DrrConfig,
    lung_cutoff_mm: f64,
) -> Result<CalibrationResult, MaskProjError> {
    if cases.is_empty() {
        return Err(MaskProjError::EmptyDataset);
    }
    let cutoffs = grid.values()?;

    let lung_cutoff = CutoffConfig::new(CutoffMode::Thickness, lung_cutoff_mm)?;
    let mut povs = Vec::with_capacity(cases.len());
    let mut lungs2d = Vec::with_capacity(cases.len());
    let mut lesion_maps = Vec::with_capacity(cases.len());
    for (index, case) in cases.iter().enumerate() {
        let pov = quant::pov(case.lung, case.lesion)
            .map_err(|source| MaskProjError::Case { index, source })?;
        let lung2d = binarize_map(&thickness_projection(case.lung), &lung_cutoff)?;
        let map = match mode {
            CutoffMode::Thickness => thickness_projection(case.lesion),
            CutoffMode::Intensity => intensity_projection(case.volume, case.lesion, drr_cfg)?,
        };
        povs.push(pov);
        lungs2d.push(lung2d);
        lesion_maps.push(map);
    }

    let mut curve = Vec::with_capacity(cutoffs.len());
    let mut best: Option<(f64, f64)> = None;
    for &cutoff in &cutoffs {
        let cfg = CutoffConfig { mode, cutoff, inclusive: true };
        let mut sum = 0.0;
        for index in 0..cases.len() {
            let lesion2d = binarize_map(&lesion_maps[index], &cfg)?;
            let poa = quant::poa(&lungs2d[index], &lesion2d)
                .map_err(|source| MaskProjError::Case { index, source })?;
            sum += (poa - povs[index]).abs();
        }
        let mean = sum / cases.len() as f64;
        curve.push((cutoff, mean));
        // strict < keeps the smallest cutoff on ties
        if best.map(|(_, m)| mean < m).unwrap_or(true) {
            best = Some((cutoff, mean));
        }
    }
    let (best_cutoff, best_mae) = best.expect("grid is non-empty");

    Ok(CalibrationResult { mode, best_cutoff, best_mae, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3;

    fn mask3d(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        f: impl Fn(usize, usize, usize) -> bool,
    ) -> BinaryMask3D {
        let grid = Grid3::new(dims, spacing);
        let mut data = Vec::new();
        for z in 0..dims.2 {
            for y in 0..dims.1 {
                for x in 0..dims.0 {
                    data.push(f(x, y, z));
                }
            }
        }
        BinaryMask3D::new(grid, data).unwrap()
    }

    #[test]
    fn box_mask_thickness_footprint() {
        let mask = mask3d((6, 100, 6), (1.0, 1.0, 1.0), |x, _, z| x < 4 && z < 4);
        let t = thickness_projection(&mask);
        for z in 0..6 {
            for x in 0..6 {
                let expect = if x < 4 && z < 4 { 100.0 } else { 0.0 };
                assert_eq!(t.at(x, z), expect);
            }
        }
    }

    #[test]
    fn empty_mask_projects_to_zero() {
        let mask = mask3d((4, 10, 4), (1.0, 0.5, 1.0), |_, _, _| false);
        assert!(thickness_projection(&mask).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disjoint_slabs_sum_depths() {
        // 20 voxels + 15 voxels at sy = 0.5 mm -> 17.5 mm
        let mask = mask3d((1, 60, 1), (1.0, 0.5, 1.0), |_, y, _| y < 20 || (30..45).contains(&y));
        let t = thickness_projection(&mask);
        assert_eq!(t.at(0, 0), 17.5);
    }

    #[test]
    fn intensity_of_constant_column() {
        // 40 masked voxels of HU -600 (a = 0.424) at sy = 1 mm -> 16.96
        let grid = Grid3::new((1, 40, 1), (1.0, 1.0, 1.0));
        let volume = Volume::filled(grid, -600.0).unwrap();
        let mask = mask3d((1, 40, 1), (1.0, 1.0, 1.0), |_, _, _| true);
        let img = intensity_projection(&volume, &mask, &DrrConfig::default()).unwrap();
        assert!((img.at(0, 0) - 16.96).abs() < 1e-12);
        assert_eq!(img.kind(), ImageKind::IntensityIntegral);
    }

    #[test]
    fn empty_mask_intensity_is_zero() {
        let grid = Grid3::new((3, 5, 3), (1.0, 1.0, 1.0));
        let volume = Volume::filled(grid, 100.0).unwrap();
        let mask = mask3d((3, 5, 3), (1.0, 1.0, 1.0), |_, _, _| false);
        let img = intensity_projection(&volume, &mask, &DrrConfig::default()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_mask_equals_drr_projection() {
        let grid = Grid3::new((4, 6, 5), (1.0, 0.8, 1.0));
        let mut volume = Volume::filled(grid, -500.0).unwrap();
        for (i, v) in volume.data_mut().iter_mut().enumerate() {
            *v += (i % 17) as f32 * 10.0;
        }
        let mask = mask3d((4, 6, 5), (1.0, 0.8, 1.0), |_, _, _| true);
        let cfg = DrrConfig::default();
        let masked = intensity_projection(&volume, &mask, &cfg).unwrap();
        let drr = crate::drr::project_drr(&volume, &cfg).unwrap();
        assert_eq!(masked.data(), drr.data());
    }

    #[test]
    fn geometry_mismatch_is_pairing_error() {
        let volume = Volume::filled(Grid3::new((2, 2, 2), (1.0, 1.0, 1.0)), 0.0).unwrap();
        let mask = mask3d((2, 2, 2), (1.0, 1.0, 2.0), |_, _, _| true);
        assert!(matches!(
            intensity_projection(&volume, &mask, &DrrConfig::default()),
            Err(MaskProjError::GeometryMismatch)
        ));
    }

    #[test]
    fn binarize_inclusive_boundary() {
        let grid = crate::grid::Grid2::new((3, 1), (1.0, 1.0));
        let img = ProjectionImage::new(grid, vec![38.0, 37.9, 0.0], ImageKind::ThicknessMm)
            .unwrap();
        let cfg = CutoffConfig::new(CutoffMode::Thickness, 38.0).unwrap();
        let mask = binarize_map(&img, &cfg).unwrap();
        assert_eq!(mask.data(), &[true, false, false]);

        let zero = CutoffConfig::new(CutoffMode::Thickness, 0.0).unwrap();
        assert_eq!(binarize_map(&img, &zero).unwrap().true_count(), 3);
    }

    #[test]
    fn binarize_kind_mode_mismatch() {
        let grid = crate::grid::Grid2::new((2, 1), (1.0, 1.0));
        let img = ProjectionImage::new(grid, vec![1.0, 2.0], ImageKind::IntensityIntegral).unwrap();
        let cfg = CutoffConfig::new(CutoffMode::Thickness, 1.0).unwrap();
        assert!(matches!(binarize_map(&img, &cfg), Err(MaskProjError::KindModeMismatch { .. })));
    }

    #[test]
    fn grid_values_include_endpoints() {
        let grid = CutoffGrid { lo: 10.0, hi: 90.0, step: 10.0 };
        let values = grid.values().unwrap();
        assert_eq!(values.len(), 9);
        assert_eq!(values[0], 10.0);
        assert_eq!(*values.last().unwrap(), 90.0);

        let single = CutoffGrid { lo: 5.0, hi: 5.0, step: 1.0 };
        assert_eq!(single.values().unwrap(), vec![5.0]);

        // fractional steps still land on hi
        let frac = CutoffGrid { lo: 0.0, hi: 1.0, step: 0.1 };
        assert_eq!(frac.values().unwrap().len(), 11);
    }

    /// Full-depth lesion: any thickness cutoff at or below the common depth
    /// gives POa == POv exactly, so the tie-break picks the smallest value.
    #[test]
    fn calibrate_full_depth_lesion_prefers_smallest() {
        let dims = (20, 100, 20);
        let spacing = (1.0, 1.0, 1.0);
        let lung = mask3d(dims, spacing, |x, _, z| x < 16 && z < 16);
        let lesion = mask3d(dims, spacing, |x, _, z| x < 8 && z < 8);
        let volume = Volume::filled(Grid3::new(dims, spacing), -700.0).unwrap();

        let cases = [CalibrationCase { volume: &volume, lung: &lung, lesion: &lesion }];
        let result = calibrate_cutoff(
            &cases,
            CutoffMode::Thickness,
            &CutoffGrid { lo: 10.0, hi: 90.0, step: 10.0 },
            &DrrConfig::default(),
            DEFAULT_LUNG_CUTOFF_MM,
        )
        .unwrap();

        assert_eq!(result.best_cutoff, 10.0);
        assert_eq!(result.best_mae, 0.0);
        // every cutoff <= 100 mm depth reproduces POv exactly
        assert!(result.curve.iter().all(|&(_, m)| m == 0.0));
    }

    /// Lesion of 30 mm AP depth: cutoffs above the depth suppress the whole
    /// lesion (POa = 0, MAE = POv); cutoffs at or below recover the exact
    /// footprint. The curve is a step function.
    #[test]
    fn calibrate_step_curve_for_shallow_lesion() {
        let dims = (20, 100, 20);
        let spacing = (1.0, 1.0, 1.0);
        let lung = mask3d(dims, spacing, |x, _, z| x < 16 && z < 16);
        let lesion = mask3d(dims, spacing, |x, y, z| x < 8 && z < 8 && y < 30);
        let volume = Volume::filled(Grid3::new(dims, spacing), -700.0).unwrap();
        let pov = quant::pov(&lung, &lesion).unwrap();

        let cases = [CalibrationCase { volume: &volume, lung: &lung, lesion: &lesion }];
        let result = calibrate_cutoff(
            &cases,
            CutoffMode::Thickness,
            &CutoffGrid { lo: 10.0, hi: 90.0, step: 10.0 },
            &DrrConfig::default(),
            DEFAULT_LUNG_CUTOFF_MM,
        )
        .unwrap();

        // footprint POa = 64/256 = 25%; POv = 25% * 30/100 = 7.5%
        let footprint_poa = 25.0;
        for &(cutoff, m) in &result.curve {
            let expect = if cutoff <= 30.0 { footprint_poa - pov } else { pov };
            assert!((m - expect).abs() < 1e-12, "cutoff {cutoff}: {m} vs {expect}");
        }
        assert_eq!(result.best_cutoff, 40.0); // MAE jumps from 17.5 down to 7.5
        assert_eq!(result.best_mae, pov);
    }

    #[test]
    fn calibrate_single_value_grid() {
        let dims = (10, 50, 10);
        let spacing = (1.0, 1.0, 1.0);
        let lung = mask3d(dims, spacing, |_, _, _| true);
        let lesion = mask3d(dims, spacing, |x, _, _| x < 5);
        let volume = Volume::filled(Grid3::new(dims, spacing), -700.0).unwrap();
        let cases = [CalibrationCase { volume: &volume, lung: &lung, lesion: &lesion }];
        let result = calibrate_cutoff(
            &cases,
            CutoffMode::Thickness,
            &CutoffGrid { lo: 17.0, hi: 17.0, step: 3.0 },
            &DrrConfig::default(),
            DEFAULT_LUNG_CUTOFF_MM,
        )
        .unwrap();
        assert_eq!(result.best_cutoff, 17.0);
        assert_eq!(result.curve.len(), 1);
    }

    #[test]
    fn empty_dataset_rejected() {
        let result = calibrate_cutoff(
            &[],
            CutoffMode::Thickness,
            &CutoffGrid { lo: 0.0, hi: 1.0, step: 1.0 },
            &DrrConfig::default(),
            DEFAULT_LUNG_CUTOFF_MM,
        );
        assert!(matches!(result, Err(MaskProjError::EmptyDataset)));
    }
}
