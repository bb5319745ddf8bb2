//! MetaImage reader/writer (the format ITK-Snap exports natively).
//!
//! Supported on read: `.mha` with LOCAL payload and `.mhd` pointing to a
//! raw file, binary data, optional zlib compression (`CompressedData`),
//! both byte orders (`BinaryDataByteOrderMSB`, default little-endian) and
//! the common scalar element types. Written files are uncompressed
//! little-endian `.mha` (or `.mhd` + `.raw` when the path ends in `.mhd`):
//! `MET_FLOAT` for volumes, `MET_UCHAR` 0/1 for masks.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::ZlibDecoder;

use super::IoError;
use crate::grid::Grid3;
use crate::types::{BinaryMask3D, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ElementType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ElementType {
    fn parse(s: &str) -> Result<Self, IoError> {
        match s {
            "MET_CHAR" => Ok(ElementType::I8),
            "MET_UCHAR" => Ok(ElementType::U8),
            "MET_SHORT" => Ok(ElementType::I16),
            "MET_USHORT" => Ok(ElementType::U16),
            "MET_INT" => Ok(ElementType::I32),
            "MET_UINT" => Ok(ElementType::U32),
            "MET_FLOAT" => Ok(ElementType::F32),
            "MET_DOUBLE" => Ok(ElementType::F64),
            other => Err(IoError::Unsupported(format!("element type {other}"))),
        }
    }

    fn byte_size(self) -> usize {
        match self {
            ElementType::I8 | ElementType::U8 => 1,
            ElementType::I16 | ElementType::U16 => 2,
            ElementType::I32 | ElementType::U32 | ElementType::F32 => 4,
            ElementType::F64 => 8,
        }
    }
}

#[derive(Debug)]
struct Header {
    grid: Grid3,
    element_type: ElementType,
    big_endian: bool,
    compressed: bool,
    header_size: Option<i64>,
    data_file: String,
    intensity_slope: f64,
    intensity_offset: f64,
}

fn parse_bool(key: &str, value: &str) -> Result<bool, IoError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(IoError::HeaderParse {
            key: key.to_string(),
            reason: format!("expected True/False, got `{other}`"),
        }),
    }
}

fn parse_triple<T: std::str::FromStr>(key: &str, value: &str) -> Result<(T, T, T), IoError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(IoError::HeaderParse {
            key: key.to_string(),
            reason: format!("expected 3 values, got {}", parts.len()),
        });
    }
    let mut vals = parts.iter().map(|p| {
        p.parse::<T>().map_err(|_| IoError::HeaderParse {
            key: key.to_string(),
            reason: format!("cannot parse `{p}`"),
        })
    });
    Ok((vals.next().unwrap()?, vals.next().unwrap()?, vals.next().unwrap()?))
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, IoError> {
    value.trim().parse::<T>().map_err(|_| IoError::HeaderParse {
        key: key.to_string(),
        reason: format!("cannot parse `{}`", value.trim()),
    })
}

/// Parses header lines up to and including `ElementDataFile`, returning the
/// header and the byte offset just past the header (start of LOCAL payload).
fn parse_header(bytes: &[u8]) -> Result<(Header, usize), IoError> {
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut spacing = (1.0f64, 1.0f64, 1.0f64);
    let mut origin = (0.0f64, 0.0f64, 0.0f64);
    let mut element_type: Option<ElementType> = None;
    let mut big_endian = false;
    let mut compressed = false;
    let mut header_size: Option<i64> = None;
    let mut data_file: Option<String> = None;
    let mut intensity_slope = 1.0f64;
    let mut intensity_offset = 0.0f64;

    let mut pos = 0usize;
    while pos < bytes.len() {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[pos..line_end]);
        let line = line.trim_end_matches('\r');
        let next_pos = line_end.saturating_add(1);

        let Some((key, value)) = line.split_once('=') else {
            if line.trim().is_empty() {
                pos = next_pos;
                continue;
            }
            return Err(IoError::HeaderParse {
                key: line.trim().to_string(),
                reason: "line is not `Key = Value`".to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();

        match key {
            "ObjectType" => {
                if value != "Image" {
                    return Err(IoError::Unsupported(format!("ObjectType {value}")));
                }
            }
            "NDims" => {
                let n: usize = parse_scalar(key, value)?;
                if n != 3 {
                    return Err(IoError::Unsupported(format!("NDims {n} (only 3D supported)")));
                }
            }
            "DimSize" => {
                let d: (usize, usize, usize) = parse_triple(key, value)?;
                if d.0 == 0 || d.1 == 0 || d.2 == 0 {
                    return Err(IoError::HeaderParse {
                        key: key.to_string(),
                        reason: "all dims must be >= 1".to_string(),
                    });
                }
                dims = Some(d);
            }
            "ElementSpacing" | "ElementSize" => {
                let s: (f64, f64, f64) = parse_triple(key, value)?;
                if s.0 <= 0.0 || s.1 <= 0.0 || s.2 <= 0.0 {
                    return Err(IoError::HeaderParse {
                        key: key.to_string(),
                        reason: "spacing must be > 0".to_string(),
                    });
                }
                spacing = s;
            }
            "Offset" | "Origin" | "Position" => {
                origin = parse_triple(key, value)?;
            }
            "ElementType" => element_type = Some(ElementType::parse(value)?),
            "BinaryData" => {
                if !parse_bool(key, value)? {
                    return Err(IoError::Unsupported("ASCII MetaImage data".to_string()));
                }
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" => {
                big_endian = parse_bool(key, value)?;
            }
            "CompressedData" => compressed = parse_bool(key, value)?,
            "CompressedDataSize" => {
                let _: u64 = parse_scalar(key, value)?;
            }
            "HeaderSize" => header_size = Some(parse_scalar(key, value)?),
            "ElementNumberOfChannels" => {
                let n: usize = parse_scalar(key, value)?;
                if n != 1 {
                    return Err(IoError::Unsupported(format!(
                        "ElementNumberOfChannels {n} (only scalar images supported)"
                    )));
                }
            }
            "ElementToIntensityFunctionSlope" => {
                intensity_slope = parse_scalar(key, value)?;
            }
            "ElementToIntensityFunctionOffset" => {
                intensity_offset = parse_scalar(key, value)?;
            }
            "ElementDataFile" => {
                data_file = Some(value.to_string());
                pos = next_pos;
                break;
            }
            // TransformMatrix, AnatomicalOrientation, CenterOfRotation, ...
            _ => {}
        }
        pos = next_pos;
    }

    let dims = dims.ok_or_else(|| IoError::HeaderParse {
        key: "DimSize".to_string(),
        reason: "missing".to_string(),
    })?;
    let element_type = element_type.ok_or_else(|| IoError::HeaderParse {
        key: "ElementType".to_string(),
        reason: "missing".to_string(),
    })?;
    let data_file = data_file.ok_or_else(|| IoError::HeaderParse {
        key: "ElementDataFile".to_string(),
        reason: "missing".to_string(),
    })?;

    let grid = Grid3 { dims, spacing, origin };
    let header = Header {
        grid,
        element_type,
        big_endian,
        compressed,
        header_size,
        data_file,
        intensity_slope,
        intensity_offset,
    };
    Ok((header, pos))
}

fn decode_elements(header: &Header, payload: &[u8]) -> Result<Vec<f32>, IoError> {
    let n = header.grid.voxel_count();
    let elem = header.element_type;
    let expected_bytes = n * elem.byte_size();

    let raw: Vec<u8> = if header.compressed {
        let mut out = Vec::with_capacity(expected_bytes);
        let mut decoder = ZlibDecoder::new(payload);
        decoder.read_to_end(&mut out).map_err(|e| IoError::HeaderParse {
            key: "CompressedData".to_string(),
            reason: format!("zlib inflate failed: {e}"),
        })?;
        out
    } else {
        payload.to_vec()
    };

    if raw.len() != expected_bytes {
        return Err(IoError::Integrity { expected: n, actual: raw.len() / elem.byte_size() });
    }

    let mut values = Vec::with_capacity(n);
    macro_rules! decode {
        ($ty:ty) => {{
            const W: usize = std::mem::size_of::<$ty>();
            for chunk in raw.chunks_exact(W) {
                let arr: [u8; W] = chunk.try_into().unwrap();
                let v = if header.big_endian {
                    <$ty>::from_be_bytes(arr)
                } else {
                    <$ty>::from_le_bytes(arr)
                };
                values.push(v as f32);
            }
        }};
    }
    match elem {
        ElementType::I8 => decode!(i8),
        ElementType::U8 => decode!(u8),
        ElementType::I16 => decode!(i16),
        ElementType::U16 => decode!(u16),
        ElementType::I32 => decode!(i32),
        ElementType::U32 => decode!(u32),
        ElementType::F32 => decode!(f32),
        ElementType::F64 => decode!(f64),
    }
    Ok(values)
}

/// Reads the header and raw element values (before any intensity rescale).
fn read_meta(path: &Path) -> Result<(Header, Vec<f32>), IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let (header, body_offset) = parse_header(&bytes)?;

    let payload: Vec<u8> = if header.data_file == "LOCAL" {
        bytes[body_offset..].to_vec()
    } else {
        if header.data_file.contains("%") {
            return Err(IoError::Unsupported(
                "ElementDataFile file patterns (slice lists) are not supported".to_string(),
            ));
        }
        let raw_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&header.data_file);
        let mut raw = fs::read(&raw_path).map_err(|e| IoError::io(&raw_path, e))?;
        match header.header_size {
            Some(skip) if skip > 0 => {
                let skip = skip as usize;
                if skip > raw.len() {
                    return Err(IoError::Integrity { expected: skip, actual: raw.len() });
                }
                raw.drain(..skip);
            }
            Some(-1) => {
                // data is at the end of the file
                let needed = header.grid.voxel_count() * header.element_type.byte_size();
                if needed > raw.len() {
                    return Err(IoError::Integrity {
                        expected: header.grid.voxel_count(),
                        actual: raw.len() / header.element_type.byte_size(),
                    });
                }
                raw.drain(..raw.len() - needed);
            }
            _ => {}
        }
        raw
    };

    let values = decode_elements(&header, &payload)?;
    Ok((header, values))
}

/// Loads a CT volume. Element values are converted to Hounsfield Units as
/// stored, honoring the header's intensity slope/offset when present.
pub fn load_volume(path: &Path) -> Result<Volume, IoError> {
    let (header, mut values) = read_meta(path)?;
    if header.intensity_slope != 1.0 || header.intensity_offset != 0.0 {
        let slope = header.intensity_slope;
        let offset = header.intensity_offset;
        for v in &mut values {
            *v = (slope * f64::from(*v) + offset) as f32;
        }
    }
    Volume::new(header.grid, values).map_err(IoError::from)
}

/// Loads a 3D binary mask: stored voxel value != 0 maps to true.
pub fn load_mask3d(path: &Path) -> Result<BinaryMask3D, IoError> {
    let (header, values) = read_meta(path)?;
    let data = values.iter().map(|&v| v != 0.0).collect();
    BinaryMask3D::new(header.grid, data).map_err(IoError::from)
}

/// Reads only the grid geometry from a MetaImage header (payload untouched
/// for `.mhd`; for `.mha` the payload is read but not decoded).
pub fn read_volume_geometry(path: &Path) -> Result<Grid3, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let (header, _) = parse_header(&bytes)?;
    Ok(header.grid)
}

fn write_meta(
    path: &Path,
    grid: Grid3,
    element_type: &str,
    payload: &[u8],
) -> Result<(), IoError> {
    let is_mhd = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("mhd"))
        .unwrap_or(false);

    let data_file_line = if is_mhd {
        let raw_name = path
            .with_extension("raw")
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data.raw".to_string());
        raw_name
    } else {
        "LOCAL".to_string()
    };

    let header = format!(
        "ObjectType = Image\n\
         NDims = 3\n\
         BinaryData = True\n\
         BinaryDataByteOrderMSB = False\n\
         CompressedData = False\n\
         DimSize = {} {} {}\n\
         ElementSpacing = {} {} {}\n\
         Offset = {} {} {}\n\
         ElementType = {}\n\
         ElementDataFile = {}\n",
        grid.dims.0,
        grid.dims.1,
        grid.dims.2,
        grid.spacing.0,
        grid.spacing.1,
        grid.spacing.2,
        grid.origin.0,
        grid.origin.1,
        grid.origin.2,
        element_type,
        data_file_line,
    );

    if is_mhd {
        fs::write(path, header.as_bytes()).map_err(|e| IoError::io(path, e))?;
        let raw_path = path.with_extension("raw");
        fs::write(&raw_path, payload).map_err(|e| IoError::io(&raw_path, e))?;
    } else {
        let mut bytes = header.into_bytes();
        bytes.extend_from_slice(payload);
        fs::write(path, bytes).map_err(|e| IoError::io(path, e))?;
    }
    Ok(())
}

/// Writes a volume as MetaImage `MET_FLOAT`, little-endian, uncompressed.
pub fn save_volume(volume: &Volume, path: &Path) -> Result<(), IoError> {
    let mut payload = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    write_meta(path, volume.grid(), "MET_FLOAT", &payload)
}

/// Writes a mask as MetaImage `MET_UCHAR` with values 0/1.
pub fn save_mask3d(mask: &BinaryMask3D, path: &Path) -> Result<(), IoError> {
    let payload: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    write_meta(path, mask.grid(), "MET_UCHAR", &payload)
}
