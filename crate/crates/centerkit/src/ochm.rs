//! OCHM raster files and their JSON sidecars.
//!
//! Layout, all little-endian:
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `OCHM`                           |
//! | 2     | u16 version, always 1                  |
//! | 2     | u16 reserved, written as 0             |
//! | 4     | u32 channels                           |
//! | 4     | u32 height                             |
//! | 4     | u32 width                              |
//! | 4     | f32 stride                             |
//! | 4·n   | f32 values, channel-major, row-major   |

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use centerkit_core::Heatmap;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"OCHM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum OchmError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after raster data")]
    Trailing(usize),
    #[error("dimension {0} does not fit in u32")]
    TooLarge(usize),
    #[error(transparent)]
    Invalid(#[from] centerkit_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Serializes a raster into OCHM bytes.
pub fn encode(map: &Heatmap) -> Result<Vec<u8>, OchmError> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| OchmError::TooLarge(v));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&dim(map.channels())?.to_le_bytes());
    out.extend_from_slice(&dim(map.height())?.to_le_bytes());
    out.extend_from_slice(&dim(map.width())?.to_le_bytes());
    out.extend_from_slice(&map.stride().to_le_bytes());
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses OCHM bytes; values must lie in [0, 1].
pub fn decode(bytes: &[u8]) -> Result<Heatmap, OchmError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(OchmError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(OchmError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(OchmError::UnsupportedVersion(version));
    }
    let channels = u32_at(bytes, 8) as usize;
    let height = u32_at(bytes, 12) as usize;
    let width = u32_at(bytes, 16) as usize;
    let stride = f32::from_bits(u32_at(bytes, 20));
    let count = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or(OchmError::TooLarge(usize::MAX))?;
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() < expected {
        return Err(OchmError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(OchmError::Trailing(bytes.len() - expected));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Heatmap::from_data(channels, height, width, stride, data)?)
}

pub fn write_ochm<W: Write>(mut w: W, map: &Heatmap) -> Result<(), OchmError> {
    w.write_all(&encode(map)?)?;
    Ok(())
}

pub fn read_ochm<R: Read>(mut r: R) -> Result<Heatmap, OchmError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Channel metadata stored next to `<image_id>.ochm` as `<image_id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub image_id: i64,
    /// Category id of each channel, in channel order.
    pub categories: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_kind: Option<String>,
}

pub fn sidecar_path(ochm: &Path) -> PathBuf {
    ochm.with_extension("json")
}

/// Loads a raster file, mapping failures onto the CLI exit-code taxonomy.
pub fn load_raster(path: &Path) -> Result<Heatmap> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_sidecar(ochm: &Path) -> Result<Sidecar> {
    let path = sidecar_path(ochm);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CliError::Format {
            path: path.clone(),
            message: "missing sidecar".into(),
        },
        _ => CliError::io(&path, e),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Format {
        path,
        message: e.to_string(),
    })
}

/// Writes `<dir>/<image_id>.ochm` and its sidecar.
pub fn save_with_sidecar(dir: &Path, map: &Heatmap, sidecar: &Sidecar) -> Result<PathBuf> {
    let path = dir.join(format!("{}.ochm", sidecar.image_id));
    let bytes = encode(map).map_err(|e| CliError::Format {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    let side = sidecar_path(&path);
    let mut json = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    json.push(b'\n');
    fs::write(&side, json).map_err(|e| CliError::io(&side, e))?;
    Ok(path)
}

/// `.ochm` files of a directory in lexicographic order.
pub fn list_rasters(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ochm"))
        .collect();
    files.sort();
    Ok(files)
}
