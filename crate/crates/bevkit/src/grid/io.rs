//! On-disk grid format.
//!
//! Layout: 4-byte magic `BVG1`, then three little-endian u32 dimensions
//! `(ny, nx, channels)`, then `ny * nx * channels` little-endian IEEE-754
//! f32 values in row-major order. The file stores raw dimensions only;
//! pairing the payload with a [`GridSpec`] is the caller's job.
//!
//! Writes go to a sibling temporary file first and are renamed into place.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{BEVGrid, GridSpec};

/// Magic bytes / version tag of the grid format.
pub const GRID_FORMAT_VERSION: &[u8; 4] = b"BVG1";

/// Dimensioned payload as stored on disk, without metric information.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub ny: u32,
    pub nx: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl RawGrid {
    /// Length check against the header dimensions.
    pub fn validate(&self) -> Result<()> {
        let expected = (self.ny as usize)
            .checked_mul(self.nx as usize)
            .and_then(|v| v.checked_mul(self.channels as usize))
            .ok_or_else(|| Error::contract("raw grid dimensions overflow"))?;
        if self.data.len() != expected {
            return Err(Error::contract(format!(
                "raw grid data length {} does not match {}x{}x{}",
                self.data.len(),
                self.ny,
                self.nx,
                self.channels
            )));
        }
        Ok(())
    }
}

impl From<&BEVGrid> for RawGrid {
    fn from(grid: &BEVGrid) -> Self {
        RawGrid {
            ny: grid.spec().ny() as u32,
            nx: grid.spec().nx() as u32,
            channels: grid.channels() as u32,
            data: grid.data().to_vec(),
        }
    }
}

/// Serialize a raw grid.
pub fn write_raw_grid(raw: &RawGrid, path: &Path) -> Result<()> {
    raw.validate()?;
    let mut bytes = Vec::with_capacity(16 + raw.data.len() * 4);
    bytes.extend_from_slice(GRID_FORMAT_VERSION);
    bytes.extend_from_slice(&raw.ny.to_le_bytes());
    bytes.extend_from_slice(&raw.nx.to_le_bytes());
    bytes.extend_from_slice(&raw.channels.to_le_bytes());
    for v in &raw.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Serialize a grid (spec dimensions become the header).
pub fn write_grid(grid: &BEVGrid, path: &Path) -> Result<()> {
    write_raw_grid(&RawGrid::from(grid), path)
}

/// Deserialize a raw grid, validating magic, dimensions, and payload length.
pub fn read_raw_grid(path: &Path) -> Result<RawGrid> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(Error::format(path, "file shorter than the 16-byte header"));
    }
    if &bytes[0..4] != GRID_FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!(
                "bad magic {:?}, expected \"BVG1\"",
                String::from_utf8_lossy(&bytes[0..4])
            ),
        ));
    }
    let ny = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let nx = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let channels = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let count = (ny as usize)
        .checked_mul(nx as usize)
        .and_then(|v| v.checked_mul(channels as usize))
        .ok_or_else(|| Error::format(path, format!("dimensions {ny}x{nx}x{channels} overflow")))?;
    let payload = &bytes[16..];
    let expected = count
        .checked_mul(4)
        .ok_or_else(|| Error::format(path, "payload size overflows"))?;
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "truncated payload: {} bytes, expected {expected}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!(
                "trailing bytes: {} after {expected}-byte payload",
                payload.len() - expected
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawGrid {
        ny,
        nx,
        channels,
        data,
    })
}

/// Deserialize a grid and attach a spec, verifying the dimensions agree.
pub fn read_grid(path: &Path, spec: GridSpec) -> Result<BEVGrid> {
    let raw = read_raw_grid(path)?;
    if raw.ny as usize != spec.ny() || raw.nx as usize != spec.nx() {
        return Err(Error::format(
            path,
            format!(
                "grid is {}x{} but the spec describes {}x{}",
                raw.ny,
                raw.nx,
                spec.ny(),
                spec.nx()
            ),
        ));
    }
    bev_grid_from_raw(spec, raw)
}

fn bev_grid_from_raw(spec: GridSpec, raw: RawGrid) -> Result<BEVGrid> {
    BEVGrid::new(spec, raw.channels as usize, raw.data)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
