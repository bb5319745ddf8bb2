//! 2D image carrier: 16-bit grayscale PNG plus a JSON sidecar that keeps
//! what PNG cannot (physical pixel spacing, image kind, value window).
//! Masks are 8-bit PNG with values {0, 255}.
//!
//! Quantization to 16 bits is round-half-up of the window-normalized value,
//! so round-trips are within 1/65535 of the window range.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::{sidecar_path, IoError};
use crate::grid::Grid2;
use crate::types::{BinaryMask2D, ImageKind, ProjectionImage};

pub const SIDECAR_DEFAULT_SPACING: (f64, f64) = (1.0, 1.0);

/// JSON sidecar written next to every PNG: `{"spacing_mm":[sx,sz],
/// "kind":"...","window":[lo,hi]}`. Masks use kind `"mask"` and no window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub spacing_mm: [f64; 2],
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

fn parse_kind(s: &str, path: &Path) -> Result<ImageKind, IoError> {
    match s {
        "drr" => Ok(ImageKind::Drr),
        "thickness-mm" => Ok(ImageKind::ThicknessMm),
        "intensity-integral" => Ok(ImageKind::IntensityIntegral),
        "probability" => Ok(ImageKind::Probability),
        other => Err(IoError::Sidecar {
            path: path.to_path_buf(),
            reason: format!("unknown image kind `{other}`"),
        }),
    }
}

/// Value window used to scale an image into [0, 65535]. Probability images
/// always use [0, 1]; everything else uses [0, max] ([0, 1] when the image
/// is all zeros).
fn save_window(img: &ProjectionImage) -> (f64, f64) {
    match img.kind() {
        ImageKind::Probability => (0.0, 1.0),
        _ => {
            let hi = img.max_value();
            if hi > 0.0 {
                (0.0, hi)
            } else {
                (0.0, 1.0)
            }
        }
    }
}

#[inline]
fn round_half_up(x: f64) -> u16 {
    let q = (x + 0.5).floor();
    q.clamp(0.0, 65535.0) as u16
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), IoError> {
    let sc_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| IoError::Sidecar {
        path: sc_path.clone(),
        reason: e.to_string(),
    })?;
    fs::write(&sc_path, json).map_err(|e| IoError::io(&sc_path, e))
}

fn read_sidecar(path: &Path) -> Result<Option<Sidecar>, IoError> {
    let sc_path = sidecar_path(path);
    if !sc_path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sc_path).map_err(|e| IoError::io(&sc_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| IoError::Sidecar {
        path: sc_path,
        reason: e.to_string(),
    })?;
    Ok(Some(sidecar))
}

/// Writes a scalar image as 16-bit grayscale PNG + sidecar.
pub fn save_image2d(img: &ProjectionImage, path: &Path) -> Result<(), IoError> {
    // The type invariant already bounds probability images, but data_mut
    // allows mutation after construction, so re-check before persisting.
    if img.kind() == ImageKind::Probability {
        if let Some((index, &value)) = img
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(IoError::Invariant(
                crate::types::InvariantError::ProbabilityOutOfRange { index, value },
            ));
        }
    }

    let (lo, hi) = save_window(img);
    let scale = 65535.0 / (hi - lo);
    let (nx, nz) = img.dims();
    let mut pixels: Vec<u16> = Vec::with_capacity(nx * nz);
    for v in img.data() {
        pixels.push(round_half_up((v - lo) * scale));
    }
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(nx as u32, nz as u32, pixels).expect("pixel count checked");
    buffer
        .save(path)
        .map_err(|e| IoError::Png { path: path.to_path_buf(), source: e })?;

    let (sx, sz) = img.spacing();
    write_sidecar(
        path,
        &Sidecar {
            spacing_mm: [sx, sz],
            kind: img.kind().to_string(),
            window: Some([lo, hi]),
        },
    )
}

/// Writes a binary mask as 8-bit PNG with values {0, 255} + sidecar.
pub fn save_mask2d(mask: &BinaryMask2D, path: &Path) -> Result<(), IoError> {
    let (nx, nz) = mask.dims();
    let pixels: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buffer: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(nx as u32, nz as u32, pixels).expect("pixel count checked");
    buffer
        .save(path)
        .map_err(|e| IoError::Png { path: path.to_path_buf(), source: e })?;

    let (sx, sz) = mask.spacing();
    write_sidecar(
        path,
        &Sidecar { spacing_mm: [sx, sz], kind: "mask".to_string(), window: None },
    )
}

fn read_luma16(path: &Path) -> Result<(usize, usize, Vec<u16>), IoError> {
    let dynimg =
        image::open(path).map_err(|e| IoError::Png { path: path.to_path_buf(), source: e })?;
    let luma = dynimg.into_luma16();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    Ok((w, h, luma.into_raw()))
}

/// Loads a scalar image. A missing sidecar falls back to kind=drr, spacing
/// (1, 1) mm and window [0, 65535] (raw pixel values); the fallback is
/// reported in the returned warnings.
pub fn load_image2d(path: &Path) -> Result<(ProjectionImage, Vec<String>), IoError> {
    let (nx, nz, pixels) = read_luma16(path)?;
    let mut warnings = Vec::new();

    let (spacing, kind, window) = match read_sidecar(path)? {
        Some(sc) => {
            if sc.kind == "mask" {
                return Err(IoError::Sidecar {
                    path: path.to_path_buf(),
                    reason: "file is a mask; use load_mask2d".to_string(),
                });
            }
            let kind = parse_kind(&sc.kind, path)?;
            let window = sc.window.unwrap_or([0.0, 65535.0]);
            if window[1] <= window[0] {
                return Err(IoError::Sidecar {
                    path: path.to_path_buf(),
                    reason: format!("window [{}, {}] is not increasing", window[0], window[1]),
                });
            }
            ((sc.spacing_mm[0], sc.spacing_mm[1]), kind, window)
        }
        None => {
            warnings.push(format!(
                "{}: no sidecar; assuming kind=drr, spacing (1, 1) mm",
                path.display()
            ));
            (SIDECAR_DEFAULT_SPACING, ImageKind::Drr, [0.0, 65535.0])
        }
    };

    let lo = window[0];
    let span = window[1] - window[0];
    let data: Vec<f64> = pixels.iter().map(|&p| lo + f64::from(p) / 65535.0 * span).collect();
    let img = ProjectionImage::new(Grid2::new((nx, nz), spacing), data, kind)?;
    Ok((img, warnings))
}

/// Loads a binary mask: pixel != 0 maps to true. Missing sidecar falls back
/// to spacing (1, 1) mm with a warning.
pub fn load_mask2d(path: &Path) -> Result<(BinaryMask2D, Vec<String>), IoError> {
    let (nx, nz, pixels) = read_luma16(path)?;
    let mut warnings = Vec::new();

    let spacing = match read_sidecar(path)? {
        Some(sc) => (sc.spacing_mm[0], sc.spacing_mm[1]),
        None => {
            warnings.push(format!(
                "{}: no sidecar; assuming spacing (1, 1) mm",
                path.display()
            ));
            SIDECAR_DEFAULT_SPACING
        }
    };

    let data: Vec<bool> = pixels.iter().map(|&p| p != 0).collect();
    let mask = BinaryMask2D::new(Grid2::new((nx, nz), spacing), data)?;
    Ok((mask, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn constant_half_probability_quantizes_to_32768() {
        let dir = tmpdir();
        let path = dir.path().join("p.png");
        let grid = Grid2::new((2, 2), (1.0, 1.0));
        let img = ProjectionImage::filled(grid, 0.5, ImageKind::Probability).unwrap();
        save_image2d(&img, &path).unwrap();

        let (_, _, pixels) = read_luma16(&path).unwrap();
        assert!(pixels.iter().all(|&p| p == 32768));
    }

    #[test]
    fn probability_65535_loads_as_one() {
        let dir = tmpdir();
        let path = dir.path().join("p.png");
        let grid = Grid2::new((1, 1), (1.0, 1.0));
        let img = ProjectionImage::filled(grid, 1.0, ImageKind::Probability).unwrap();
        save_image2d(&img, &path).unwrap();
        let (loaded, warnings) = load_image2d(&path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(loaded.data(), &[1.0]);
        assert_eq!(loaded.kind(), ImageKind::Probability);
    }

    #[test]
    fn mask_roundtrip_identity() {
        let dir = tmpdir();
        let path = dir.path().join("m.png");
        let grid = Grid2::new((3, 2), (0.8, 1.1));
        let data = vec![true, false, true, false, false, true];
        let mask = BinaryMask2D::new(grid, data.clone()).unwrap();
        save_mask2d(&mask, &path).unwrap();
        let (loaded, warnings) = load_mask2d(&path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(loaded.data(), &data[..]);
        assert_eq!(loaded.spacing(), (0.8, 1.1));
    }

    #[test]
    fn missing_sidecar_defaults_and_warns() {
        let dir = tmpdir();
        let path = dir.path().join("raw.png");
        let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(2, 1, vec![0u16, 65535]).unwrap();
        buffer.save(&path).unwrap();

        let (img, warnings) = load_image2d(&path).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(img.kind(), ImageKind::Drr);
        assert_eq!(img.spacing(), (1.0, 1.0));
        assert_eq!(img.data(), &[0.0, 65535.0]);
    }

    #[test]
    fn thickness_roundtrip_within_window_quantum() {
        let dir = tmpdir();
        let path = dir.path().join("t.png");
        let grid = Grid2::new((4, 1), (1.0, 1.0));
        let data = vec![0.0, 12.7, 37.9999, 120.0];
        let img = ProjectionImage::new(grid, data.clone(), ImageKind::ThicknessMm).unwrap();
        save_image2d(&img, &path).unwrap();
        let (loaded, _) = load_image2d(&path).unwrap();
        let quantum = 120.0 / 65535.0;
        for (a, b) in data.iter().zip(loaded.data()) {
            assert!((a - b).abs() <= quantum, "{a} vs {b}");
        }
    }

    #[test]
    fn mutated_probability_rejected_at_save() {
        let dir = tmpdir();
        let path = dir.path().join("bad.png");
        let grid = Grid2::new((1, 1), (1.0, 1.0));
        let mut img = ProjectionImage::filled(grid, 0.5, ImageKind::Probability).unwrap();
        img.data_mut()[0] = 1.5;
        assert!(matches!(save_image2d(&img, &path), Err(IoError::Invariant(_))));
    }
}
