//! Bilinear sampling kernels and the task-specific grid sampler.
//!
//! Two coordinate conventions are used. [`sample_at`] works in metric space:
//! points outside the source extent (half-open) read exactly 0; points
//! inside interpolate over the cell-center lattice, with lattice neighbors
//! that fall off the grid contributing 0 (zero padding). [`sample_lattice`]
//! works directly in fractional index space and is used by flow warping.
//!
//! Positions within [`SNAP_EPS`] of an exact lattice coordinate are snapped
//! onto it. Floating-point noise in center computations is orders of
//! magnitude below this threshold, so integer-cell translations,
//! quarter-turn rotations, and identity resampling become exact index
//! permutations and copy values bitwise.

use super::{BEVGrid, GridSpec};

/// Snap radius, in cells, around exact lattice coordinates.
pub(crate) const SNAP_EPS: f64 = 1e-9;

#[inline]
fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() < SNAP_EPS {
        r
    } else {
        t
    }
}

/// Bilinear sample of every channel at fractional index position
/// `(u, v)` = (column, row). Lattice neighbors outside `[0, n-1]`
/// contribute 0. `out` must hold `grid.channels()` values.
pub fn sample_lattice(grid: &BEVGrid, u: f64, v: f64, out: &mut [f32]) {
    debug_assert_eq!(out.len(), grid.channels());
    let (ny, nx) = (grid.spec().ny() as i64, grid.spec().nx() as i64);
    let u = snap(u);
    let v = snap(v);
    let j0 = u.floor();
    let i0 = v.floor();
    let fu = u - j0;
    let fv = v - i0;
    let j0 = j0 as i64;
    let i0 = i0 as i64;

    let valid = |i: i64, j: i64| i >= 0 && i < ny && j >= 0 && j < nx;

    // Exact lattice position: copy the cell so the value survives bitwise.
    if fu == 0.0 && fv == 0.0 {
        if valid(i0, j0) {
            out.copy_from_slice(grid.cell(i0 as usize, j0 as usize));
        } else {
            out.fill(0.0);
        }
        return;
    }

    let corners = [
        (i0, j0, (1.0 - fu) * (1.0 - fv)),
        (i0, j0 + 1, fu * (1.0 - fv)),
        (i0 + 1, j0, (1.0 - fu) * fv),
        (i0 + 1, j0 + 1, fu * fv),
    ];

    let channels = grid.channels();
    let accumulate = |acc: &mut [f64]| {
        for &(i, j, w) in &corners {
            if w != 0.0 && valid(i, j) {
                let cell = grid.cell(i as usize, j as usize);
                for (a, &v) in acc.iter_mut().zip(cell) {
                    *a += w * v as f64;
                }
            }
        }
    };

    // Accumulate in f64; the common narrow case stays off the heap.
    if channels <= 8 {
        let mut acc = [0.0f64; 8];
        accumulate(&mut acc[..channels]);
        for (o, &a) in out.iter_mut().zip(&acc[..channels]) {
            *o = a as f32;
        }
    } else {
        let mut acc = vec![0.0f64; channels];
        accumulate(&mut acc);
        for (o, &a) in out.iter_mut().zip(&acc) {
            *o = a as f32;
        }
    }
}

/// Bilinear sample of every channel at the metric point `(x, y)`.
/// Points outside the source extent read exactly 0.
pub fn sample_at(grid: &BEVGrid, x: f64, y: f64, out: &mut [f32]) {
    let spec = grid.spec();
    if !spec.contains(x, y) {
        out.fill(0.0);
        return;
    }
    let u = (x - spec.x_min()) / spec.cell_size() - 0.5;
    let v = (y - spec.y_min()) / spec.cell_size() - 0.5;
    sample_lattice(grid, u, v, out);
}

/// Resample `src` onto a new raster: every destination cell takes the
/// bilinear interpolation of `src` at the destination cell's metric center.
/// Destination centers outside the source extent become 0.
pub fn grid_sample(src: &BEVGrid, dst_spec: GridSpec) -> BEVGrid {
    let channels = src.channels();
    let mut dst = BEVGrid::zeros(dst_spec, channels);
    let (ny, nx) = (dst_spec.ny(), dst_spec.nx());
    for i in 0..ny {
        for j in 0..nx {
            let (x, y) = dst_spec.cell_center(i, j);
            let k = dst.offset(i, j);
            sample_at(src, x, y, &mut dst.data_mut()[k..k + channels]);
        }
    }
    dst
}
