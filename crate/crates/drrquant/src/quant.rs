//! Severity measures: volume- and area-based opacity percentages, mean
//! absolute error, reader combinations and ensemble probability reduction.
//!
//! Lesion voxels/pixels outside the lung mask are excluded from the
//! numerator rather than treated as errors (readers and models can stray
//! past lung boundaries); the stray count is logged and available to
//! callers that want to surface it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BinaryMask2D, BinaryMask3D, ImageKind, InvariantError, ProjectionImage};

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("lung mask is empty; opacity percentage is undefined")]
    EmptyLung,
    #[error("geometry mismatch between paired inputs")]
    GeometryMismatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} masks, got {got}")]
    TooFewMasks { needed: usize, got: usize },
    #[error("expected a probability image, got {0}")]
    NotProbability(ImageKind),
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// Percentage of opacity by volume, with the count of lesion voxels that
/// fell outside the lung mask.
pub fn pov_with_stray(
    lung: &BinaryMask3D,
    lesion: &BinaryMask3D,
) -> Result<(f64, usize), QuantError> {
    if lung.grid() != lesion.grid() {
        return Err(QuantError::GeometryMismatch);
    }
    let mut lung_count = 0usize;
    let mut inter = 0usize;
    let mut stray = 0usize;
    for (&l, &d) in lung.data().iter().zip(lesion.data()) {
        lung_count += l as usize;
        inter += (l && d) as usize;
        stray += (d && !l) as usize;
    }
    if lung_count == 0 {
        return Err(QuantError::EmptyLung);
    }
    if stray > 0 {
        log::warn!("pov: {stray} lesion voxels outside the lung mask were excluded");
    }
    Ok((100.0 * inter as f64 / lung_count as f64, stray))
}

/// POv = 100 * lesion-in-lung voxels / lung voxels. The voxel volume
/// cancels, so this is a pure count ratio.
pub fn pov(lung: &BinaryMask3D, lesion: &BinaryMask3D) -> Result<f64, QuantError> {
    pov_with_stray(lung, lesion).map(|(p, _)| p)
}

/// Percentage of opacity by area, with the stray pixel count.
pub fn poa_with_stray(
    lung: &BinaryMask2D,
    lesion: &BinaryMask2D,
) -> Result<(f64, usize), QuantError> {
    if lung.grid() != lesion.grid() {
        return Err(QuantError::GeometryMismatch);
    }
    let mut lung_count = 0usize;
    let mut inter = 0usize;
    let mut stray = 0usize;
    for (&l, &d) in lung.data().iter().zip(lesion.data()) {
        lung_count += l as usize;
        inter += (l && d) as usize;
        stray += (d && !l) as usize;
    }
    if lung_count == 0 {
        return Err(QuantError::EmptyLung);
    }
    if stray > 0 {
        log::warn!("poa: {stray} lesion pixels outside the lung mask were excluded");
    }
    Ok((100.0 * inter as f64 / lung_count as f64, stray))
}

/// POa = 100 * lesion-in-lung pixels / lung pixels.
pub fn poa(lung: &BinaryMask2D, lesion: &BinaryMask2D) -> Result<f64, QuantError> {
    poa_with_stray(lung, lesion).map(|(p, _)| p)
}

/// Mean absolute error between paired percentage lists.
pub fn mae(xs: &[f64], ys: &[f64]) -> Result<f64, QuantError> {
    if xs.len() != ys.len() {
        return Err(QuantError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(QuantError::EmptyInput);
    }
    let sum: f64 = xs.iter().zip(ys).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / xs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskCombine {
    Intersection,
    Union,
}

/// Voxelwise intersection or union of reader masks.
pub fn combine_masks(
    readers: &[BinaryMask2D],
    mode: MaskCombine,
) -> Result<BinaryMask2D, QuantError> {
    if readers.len() < 2 {
        return Err(QuantError::TooFewMasks { needed: 2, got: readers.len() });
    }
    let grid = readers[0].grid();
    if readers.iter().any(|r| r.grid() != grid) {
        return Err(QuantError::GeometryMismatch);
    }
    let mut data = readers[0].data().to_vec();
    for reader in &readers[1..] {
        for (acc, &b) in data.iter_mut().zip(reader.data()) {
            *acc = match mode {
                MaskCombine::Intersection => *acc && b,
                MaskCombine::Union => *acc || b,
            };
        }
    }
    Ok(BinaryMask2D::new(grid, data)?)
}

/// Reader-average POa: the arithmetic mean of per-reader POa values
/// (averaging percentages, not masks).
pub fn reader_average_poa(
    readers: &[BinaryMask2D],
    lung: &BinaryMask2D,
) -> Result<f64, QuantError> {
    if readers.len() < 2 {
        return Err(QuantError::TooFewMasks { needed: 2, got: readers.len() });
    }
    let mut sum = 0.0;
    for reader in readers {
        sum += poa(lung, reader)?;
    }
    Ok(sum / readers.len() as f64)
}

/// Pixelwise arithmetic mean of probability maps.
pub fn ensemble_average(maps: &[ProjectionImage]) -> Result<ProjectionImage, QuantError> {
    if maps.is_empty() {
        return Err(QuantError::EmptyInput);
    }
    let grid = maps[0].grid();
    for map in maps {
        if map.kind() != ImageKind::Probability {
            return Err(QuantError::NotProbability(map.kind()));
        }
        if map.grid() != grid {
            return Err(QuantError::GeometryMismatch);
        }
    }
    let n = grid.pixel_count();
    let k = maps.len() as f64;
    let mut data = vec![0.0f64; n];
    for map in maps {
        for (acc, v) in data.iter_mut().zip(map.data()) {
            *acc += v;
        }
    }
    for v in &mut data {
        *v /= k;
    }
    // constructor re-validates the [0,1] range, catching mutated inputs
    Ok(ProjectionImage::new(grid, data, ImageKind::Probability)?)
}

/// Thresholds a probability map inside the lung: true iff p >= thr and the
/// lung pixel is set (inclusive boundary, like binarize_map).
pub fn probability_to_mask(
    p: &ProjectionImage,
    lung: &BinaryMask2D,
    thr: f64,
) -> Result<BinaryMask2D, QuantError> {
    if p.kind() != ImageKind::Probability {
        return Err(QuantError::NotProbability(p.kind()));
    }
    if !(0.0..=1.0).contains(&thr) {
        return Err(QuantError::ThresholdOutOfRange(thr));
    }
    if p.grid() != lung.grid() {
        return Err(QuantError::GeometryMismatch);
    }
    let data: Vec<bool> =
        p.data().iter().zip(lung.data()).map(|(&v, &l)| l && v >= thr).collect();
    Ok(BinaryMask2D::new(p.grid(), data)?)
}

/// Per-patient severity values from every method, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityRecord {
    pub case_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pov_ct: Option<f64>,
    pub poa_by_method: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid2, Grid3};

    fn mask2d(dims: (usize, usize), f: impl Fn(usize, usize) -> bool) -> BinaryMask2D {
        let grid = Grid2::new(dims, (1.0, 1.0));
        let mut data = Vec::new();
        for z in 0..dims.1 {
            for x in 0..dims.0 {
                data.push(f(x, z));
            }
        }
        BinaryMask2D::new(grid, data).unwrap()
    }

    fn mask3d(dims: (usize, usize, usize), f: impl Fn(usize, usize, usize) -> bool) -> BinaryMask3D {
        let grid = Grid3::new(dims, (1.0, 1.0, 1.0));
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
    fn pov_count_ratio() {
        let lung = mask3d((4, 4, 4), |_, _, _| true);
        let lesion = mask3d((4, 4, 4), |x, _, _| x < 1);
        assert_eq!(pov(&lung, &lesion).unwrap(), 25.0);
    }

    #[test]
    fn pov_edge_cases() {
        let lung = mask3d((2, 2, 2), |_, _, _| true);
        let empty = mask3d((2, 2, 2), |_, _, _| false);
        assert_eq!(pov(&lung, &empty).unwrap(), 0.0);
        assert_eq!(pov(&lung, &lung).unwrap(), 100.0);
        assert!(matches!(pov(&empty, &lung), Err(QuantError::EmptyLung)));
    }

    #[test]
    fn pov_excludes_and_counts_strays() {
        let lung = mask3d((4, 1, 1), |x, _, _| x < 2);
        let lesion = mask3d((4, 1, 1), |x, _, _| x >= 1);
        let (p, stray) = pov_with_stray(&lung, &lesion).unwrap();
        assert_eq!(p, 50.0);
        assert_eq!(stray, 2);
    }

    #[test]
    fn poa_count_ratio_and_constraint() {
        let lung = mask2d((100, 100), |_, _| true);
        let lesion = mask2d((100, 100), |x, z| x < 50 && z < 50);
        assert_eq!(poa(&lung, &lesion).unwrap(), 25.0);

        let lung_left = mask2d((10, 10), |x, _| x < 5);
        let lesion_right = mask2d((10, 10), |x, _| x >= 5);
        assert_eq!(poa(&lung_left, &lesion_right).unwrap(), 0.0);
    }

    #[test]
    fn poa_geometry_mismatch() {
        let a = mask2d((4, 4), |_, _| true);
        let b = mask2d((4, 5), |_, _| true);
        assert!(matches!(poa(&a, &b), Err(QuantError::GeometryMismatch)));
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[10.0, 20.0], &[12.0, 26.0]).unwrap(), 4.0);
        assert_eq!(mae(&[7.5], &[2.5]).unwrap(), 5.0);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(QuantError::LengthMismatch { .. })));
        assert!(matches!(mae(&[], &[]), Err(QuantError::EmptyInput)));
    }

    #[test]
    fn identical_readers_collapse() {
        let lung = mask2d((10, 10), |_, _| true);
        let reader = mask2d((10, 10), |x, _| x < 3);
        let readers = vec![reader.clone(), reader.clone()];
        let avg = reader_average_poa(&readers, &lung).unwrap();
        let inter = combine_masks(&readers, MaskCombine::Intersection).unwrap();
        let union = combine_masks(&readers, MaskCombine::Union).unwrap();
        assert_eq!(avg, 30.0);
        assert_eq!(poa(&lung, &inter).unwrap(), 30.0);
        assert_eq!(poa(&lung, &union).unwrap(), 30.0);
    }

    #[test]
    fn disjoint_readers_split() {
        let lung = mask2d((10, 10), |_, _| true);
        let r1 = mask2d((10, 10), |x, z| x < 1 && z < 10); // 10 px = 10%
        let r2 = mask2d((10, 10), |x, z| (2..4).contains(&x) && z < 10); // 20 px = 20%
        let readers = vec![r1, r2];
        assert_eq!(
            poa(&lung, &combine_masks(&readers, MaskCombine::Intersection).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            poa(&lung, &combine_masks(&readers, MaskCombine::Union).unwrap()).unwrap(),
            30.0
        );
        assert_eq!(reader_average_poa(&readers, &lung).unwrap(), 15.0);
    }

    #[test]
    fn one_empty_reader() {
        let lung = mask2d((10, 10), |_, _| true);
        let r1 = mask2d((10, 10), |_, _| false);
        let r2 = mask2d((10, 10), |x, _| x < 4);
        let readers = vec![r1, r2];
        assert_eq!(
            poa(&lung, &combine_masks(&readers, MaskCombine::Intersection).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            poa(&lung, &combine_masks(&readers, MaskCombine::Union).unwrap()).unwrap(),
            40.0
        );
    }

    fn prob(dims: (usize, usize), v: f64) -> ProjectionImage {
        ProjectionImage::filled(Grid2::new(dims, (1.0, 1.0)), v, ImageKind::Probability).unwrap()
    }

    #[test]
    fn ensemble_mean_and_identity() {
        let maps = vec![prob((2, 2), 0.2), prob((2, 2), 0.8)];
        let mean = ensemble_average(&maps).unwrap();
        assert!(mean.data().iter().all(|&v| v == 0.5));

        let single = ensemble_average(&maps[..1]).unwrap();
        assert_eq!(single, maps[0]);

        let copies = vec![prob((3, 3), 0.37); 5];
        let m = ensemble_average(&copies).unwrap();
        for &v in m.data() {
            assert!((v - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn probability_threshold_boundary() {
        let lung = mask2d((2, 2), |_, _| true);
        let p = prob((2, 2), 0.6);
        assert_eq!(probability_to_mask(&p, &lung, 0.5).unwrap(), lung);

        let below = prob((2, 2), 0.999);
        assert_eq!(probability_to_mask(&below, &lung, 1.0).unwrap().true_count(), 0);

        let exact = prob((2, 2), 0.5);
        assert_eq!(probability_to_mask(&exact, &lung, 0.5).unwrap().true_count(), 4);

        assert!(matches!(
            probability_to_mask(&p, &lung, 1.5),
            Err(QuantError::ThresholdOutOfRange(_))
        ));
    }
}
