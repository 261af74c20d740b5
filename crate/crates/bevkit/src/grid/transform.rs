//! BEV-side augmentation: rotation, flips, and scaling applied to grids and
//! to detection boxes so content and learning targets stay consistent.
//!
//! The forward transform acts about the grid center `c`:
//!
//! ```text
//! T(p) = c + scale * F * R(rotation) * (p - c)
//! ```
//!
//! with `R` a counter-clockwise rotation and `F = diag(flip_x ? -1 : 1,
//! flip_y ? -1 : 1)`. Grids are warped backwards (each output cell center is
//! pulled through `T^-1` and bilinearly sampled), so quarter-turn rotations
//! and flips reduce to exact index permutations.

use crate::error::{Error, Result};
use crate::eval::DetectionBox;
use crate::grid::sample::sample_at;
use crate::grid::BEVGrid;

/// Rotation / flip / scale applied about the grid center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BEVTransform {
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    /// Mirror the x axis (after rotation).
    pub flip_x: bool,
    /// Mirror the y axis (after rotation).
    pub flip_y: bool,
    /// Uniform scale factor, must be positive.
    pub scale: f64,
}

impl Default for BEVTransform {
    fn default() -> Self {
        BEVTransform {
            rotation: 0.0,
            flip_x: false,
            flip_y: false,
            scale: 1.0,
        }
    }
}

impl BEVTransform {
    pub fn new(rotation: f64, flip_x: bool, flip_y: bool, scale: f64) -> Result<Self> {
        if !rotation.is_finite() || !scale.is_finite() {
            return Err(Error::config("transform parameters must be finite"));
        }
        if scale <= 0.0 {
            return Err(Error::config(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(BEVTransform {
            rotation,
            flip_x,
            flip_y,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// The transform undoing this one. Because the factor order is fixed
    /// (scale * flip * rotate), the inverse rotation flips sign when exactly
    /// one axis is mirrored.
    pub fn inverse(&self) -> Self {
        let rotation = if self.flip_x ^ self.flip_y {
            self.rotation
        } else {
            -self.rotation
        };
        BEVTransform {
            rotation,
            flip_x: self.flip_x,
            flip_y: self.flip_y,
            scale: 1.0 / self.scale,
        }
    }

    fn is_identity(&self) -> bool {
        self.rotation == 0.0 && !self.flip_x && !self.flip_y && self.scale == 1.0
    }

    /// Forward map of a point offset from the transform center.
    fn forward_offset(&self, dx: f64, dy: f64) -> (f64, f64) {
        let (sin, cos) = self.rotation.sin_cos();
        let mut x = cos * dx - sin * dy;
        let mut y = sin * dx + cos * dy;
        if self.flip_x {
            x = -x;
        }
        if self.flip_y {
            y = -y;
        }
        (self.scale * x, self.scale * y)
    }

    /// Inverse map of a point offset from the transform center.
    fn inverse_offset(&self, dx: f64, dy: f64) -> (f64, f64) {
        let mut x = dx / self.scale;
        let mut y = dy / self.scale;
        if self.flip_x {
            x = -x;
        }
        if self.flip_y {
            y = -y;
        }
        let (sin, cos) = (-self.rotation).sin_cos();
        (cos * x - sin * y, sin * x + cos * y)
    }

    /// Forward direction angle: where a heading `yaw` points after the
    /// transform (scale leaves angles unchanged).
    fn forward_yaw(&self, yaw: f64) -> f64 {
        let mut out = yaw + self.rotation;
        if self.flip_x {
            out = std::f64::consts::PI - out;
        }
        if self.flip_y {
            out = -out;
        }
        out
    }
}

/// Warp grid content by the transform, about the grid center, with a
/// backward bilinear warp. Content pulled from outside the extent is 0.
pub fn apply_bev_transform(grid: &BEVGrid, t: &BEVTransform) -> BEVGrid {
    if t.is_identity() {
        return grid.clone();
    }
    let spec = *grid.spec();
    let (cx, cy) = spec.center();
    let channels = grid.channels();
    let mut out = BEVGrid::zeros(spec, channels);
    for i in 0..spec.ny() {
        for j in 0..spec.nx() {
            let (x, y) = spec.cell_center(i, j);
            let (sx, sy) = t.inverse_offset(x - cx, y - cy);
            let k = out.offset(i, j);
            sample_at(grid, cx + sx, cy + sy, &mut out.data_mut()[k..k + channels]);
        }
    }
    out
}

/// Companion overload of [`apply_bev_transform`] for detection boxes:
/// centers, yaws, and velocities move with the grid content. Scaling also
/// scales the BEV footprint (width, length) and velocity; height and the
/// vertical center are out of plane and stay fixed.
pub fn transform_boxes(
    boxes: &[DetectionBox],
    center: (f64, f64),
    t: &BEVTransform,
) -> Vec<DetectionBox> {
    boxes
        .iter()
        .map(|b| {
            let (dx, dy) = t.forward_offset(b.x - center.0, b.y - center.1);
            let (vx, vy) = t.forward_offset(b.vx, b.vy);
            DetectionBox {
                x: center.0 + dx,
                y: center.1 + dy,
                z: b.z,
                width: b.width * t.scale,
                length: b.length * t.scale,
                height: b.height,
                yaw: t.forward_yaw(b.yaw),
                vx,
                vy,
                class: b.class.clone(),
                score: b.score,
            }
        })
        .collect()
}
