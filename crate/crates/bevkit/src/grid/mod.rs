//! BEV raster definitions, the task grid sampler, BEV augmentation
//! transforms, and the on-disk grid format.
//!
//! A [`GridSpec`] describes a metric raster: an axis-aligned extent in the
//! ego ground plane plus a square cell size. A [`BEVGrid`] pairs a spec with
//! row-major `ny x nx x channels` data. Cell `(i, j)` (row `i`, column `j`)
//! is centered at `(x_min + (j + 0.5) * cell, y_min + (i + 0.5) * cell)`.
//!
//! Metric membership is half-open: a point with `x == x_max` or
//! `y == y_max` is outside the grid, `x == x_min` / `y == y_min` is inside.

mod io;
mod sample;
mod transform;

pub(crate) use io::write_atomic as io_write_atomic;
pub use io::{read_grid, read_raw_grid, write_grid, write_raw_grid, RawGrid, GRID_FORMAT_VERSION};
pub use sample::{grid_sample, sample_at, sample_lattice};
pub use transform::{apply_bev_transform, transform_boxes, BEVTransform};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that an extent is an integer
/// multiple of the cell size.
const EXTENT_TOL: f64 = 1e-6;

/// Metric definition of a BEV raster: extent and cell size.
///
/// Construction validates the invariants, so every `GridSpec` in circulation
/// describes a well-formed raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    cell_size: f64,
    nx: usize,
    ny: usize,
}

impl GridSpec {
    /// Validate and build a spec. Both extents must be positive integer
    /// multiples of `cell_size` (within 1e-6 of a cell).
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, cell_size: f64) -> Result<Self> {
        for (name, v) in [
            ("x_min", x_min),
            ("x_max", x_max),
            ("y_min", y_min),
            ("y_max", y_max),
            ("cell_size", cell_size),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("grid spec {name} is not finite")));
            }
        }
        if cell_size <= 0.0 {
            return Err(Error::config(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::config(format!(
                "empty extent: x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        let nx = Self::cell_count("x", x_max - x_min, cell_size)?;
        let ny = Self::cell_count("y", y_max - y_min, cell_size)?;
        Ok(GridSpec {
            x_min,
            x_max,
            y_min,
            y_max,
            cell_size,
            nx,
            ny,
        })
    }

    fn cell_count(axis: &str, span: f64, cell: f64) -> Result<usize> {
        let ratio = span / cell;
        let n = ratio.round();
        if (ratio - n).abs() > EXTENT_TOL {
            return Err(Error::config(format!(
                "{axis} extent {span} is not an integer multiple of cell size {cell}"
            )));
        }
        if !(1.0..=2_147_483_647.0).contains(&n) {
            return Err(Error::config(format!("{axis} cell count {n} out of range")));
        }
        Ok(n as usize)
    }

    /// Square spec centered on the origin: `[-half, half]` on both axes.
    pub fn centered(half_extent: f64, cell_size: f64) -> Result<Self> {
        Self::new(
            -half_extent,
            half_extent,
            -half_extent,
            half_extent,
            cell_size,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of columns (cells along x).
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of rows (cells along y).
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Metric center of the extent.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Metric center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (j as f64 + 0.5) * self.cell_size,
            self.y_min + (i as f64 + 0.5) * self.cell_size,
        )
    }

    /// Half-open membership test: `x_min <= x < x_max` and likewise for y.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    /// Cell holding the metric point, or `None` if outside the extent.
    pub fn cell_index(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.contains(x, y) {
            return None;
        }
        // The clamp guards against the ratio rounding up to the cell count
        // when x is within one ulp of x_max.
        let j = (((x - self.x_min) / self.cell_size).floor() as usize).min(self.nx - 1);
        let i = (((y - self.y_min) / self.cell_size).floor() as usize).min(self.ny - 1);
        Some((i, j))
    }
}

/// A BEV raster: spec plus row-major `ny x nx x channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct BEVGrid {
    spec: GridSpec,
    channels: usize,
    data: Vec<f32>,
}

impl BEVGrid {
    /// Build a grid from existing data. The data length must equal
    /// `ny * nx * channels` and every value must be finite.
    pub fn new(spec: GridSpec, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::contract("grid must have at least one channel"));
        }
        let expected = spec.ny() * spec.nx() * channels;
        if data.len() != expected {
            return Err(Error::contract(format!(
                "grid data length {} does not match {}x{}x{} = {}",
                data.len(),
                spec.ny(),
                spec.nx(),
                channels,
                expected
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "grid contains non-finite value {v}"
            )));
        }
        Ok(BEVGrid {
            spec,
            channels,
            data,
        })
    }

    /// All-zero grid.
    pub fn zeros(spec: GridSpec, channels: usize) -> Self {
        BEVGrid {
            spec,
            channels,
            data: vec![0.0; spec.ny() * spec.nx() * channels],
        }
    }

    /// Grid filled by evaluating `f(x, y, channel)` at every cell center.
    pub fn from_fn(
        spec: GridSpec,
        channels: usize,
        mut f: impl FnMut(f64, f64, usize) -> f32,
    ) -> Self {
        let (ny, nx) = (spec.ny(), spec.nx());
        let mut data = Vec::with_capacity(ny * nx * channels);
        for i in 0..ny {
            for j in 0..nx {
                let (x, y) = spec.cell_center(i, j);
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        BEVGrid {
            spec,
            channels,
            data,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Flat offset of cell `(i, j)`, channel 0.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.spec.nx() + j) * self.channels
    }

    /// Value at cell `(i, j)`, channel `c`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f32 {
        self.data[self.offset(i, j) + c]
    }

    /// Set the value at cell `(i, j)`, channel `c`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f32) {
        let k = self.offset(i, j) + c;
        self.data[k] = v;
    }

    /// Channel values of one cell.
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f32] {
        let k = self.offset(i, j);
        &self.data[k..k + self.channels]
    }

    /// Sum of all values across cells and channels, accumulated in f64.
    pub fn mass(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}
