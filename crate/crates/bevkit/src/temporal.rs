//! Ego-motion alignment of past BEV grids into the present reference frame.
//!
//! Motion is planar SE(2): a rotation plus a ground-plane translation.
//! Out-of-plane ego motion has no well-defined action on a BEV raster and
//! is not modeled. Alignment warps backwards: each output cell center in
//! the present frame is pulled through the inverse motion into the past
//! frame and bilinearly sampled with the grid module's kernel, so integer
//! cell translations and quarter-turn rotations are exact.

use crate::error::{Error, Result};
use crate::grid::{sample_at, BEVGrid};

/// Planar rigid motion mapping past-frame ego coordinates to present-frame
/// ego coordinates: `p_present = R(theta) * p_past + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPose {
    theta: f64,
    tx: f64,
    ty: f64,
}

impl EgoPose {
    /// Build a pose; the rotation is wrapped into `(-pi, pi]`.
    pub fn new(theta: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(theta.is_finite() && tx.is_finite() && ty.is_finite()) {
            return Err(Error::config("ego pose parameters must be finite"));
        }
        Ok(EgoPose {
            theta: wrap_angle(theta),
            tx,
            ty,
        })
    }

    pub fn identity() -> Self {
        EgoPose {
            theta: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.tx, self.ty)
    }

    /// Apply the motion to a point.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (sin, cos) = self.theta.sin_cos();
        (cos * x - sin * y + self.tx, sin * x + cos * y + self.ty)
    }

    /// Apply the inverse motion to a point.
    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.tx;
        let dy = y - self.ty;
        let (sin, cos) = (-self.theta).sin_cos();
        (cos * dx - sin * dy, sin * dx + cos * dy)
    }

    /// Composition `self o earlier`: apply `earlier` first, then `self`.
    pub fn compose(&self, earlier: &EgoPose) -> EgoPose {
        let (tx, ty) = self.apply(earlier.tx, earlier.ty);
        EgoPose {
            theta: wrap_angle(self.theta + earlier.theta),
            tx,
            ty,
        }
    }

    pub fn inverse(&self) -> EgoPose {
        let (sin, cos) = (-self.theta).sin_cos();
        EgoPose {
            theta: wrap_angle(-self.theta),
            tx: -(cos * self.tx - sin * self.ty),
            ty: -(sin * self.tx + cos * self.ty),
        }
    }

    fn is_identity(&self) -> bool {
        self.theta == 0.0 && self.tx == 0.0 && self.ty == 0.0
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    if theta > -PI && theta <= PI {
        return theta;
    }
    let wrapped = theta.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Convert per-step relative motions (frame k to frame k+1) into direct
/// motions (frame k to the final frame). With `steps.len() == n` the result
/// has `n` poses; the final frame's implicit motion is the identity.
pub fn compose_to_present(steps: &[EgoPose]) -> Vec<EgoPose> {
    let mut direct = vec![EgoPose::identity(); steps.len()];
    let mut tail = EgoPose::identity();
    for (k, step) in steps.iter().enumerate().rev() {
        tail = tail.compose(step);
        direct[k] = tail;
    }
    direct
}

/// Warp a past grid into the present frame: each present-frame cell center
/// is mapped by the inverse motion into the past grid and bilinearly
/// sampled; content from outside the past extent is 0.
pub fn align(past: &BEVGrid, motion: &EgoPose) -> BEVGrid {
    if motion.is_identity() {
        return past.clone();
    }
    let spec = *past.spec();
    let channels = past.channels();
    let mut out = BEVGrid::zeros(spec, channels);
    for i in 0..spec.ny() {
        for j in 0..spec.nx() {
            let (x, y) = spec.cell_center(i, j);
            let (sx, sy) = motion.apply_inverse(x, y);
            let k = out.offset(i, j);
            sample_at(past, sx, sy, &mut out.data_mut()[k..k + channels]);
        }
    }
    out
}

/// Align a sequence of grids (ordered oldest to present) into the present
/// frame. `motions[k]` maps frame `k` directly to the present frame; the
/// present frame itself uses the identity, so `motions.len()` must be
/// `grids.len() - 1`.
pub fn align_sequence(grids: &[BEVGrid], motions: &[EgoPose]) -> Result<Vec<BEVGrid>> {
    if grids.is_empty() {
        return Err(Error::contract("align_sequence needs at least one grid"));
    }
    if motions.len() != grids.len() - 1 {
        return Err(Error::contract(format!(
            "expected {} motions for {} grids, got {}",
            grids.len() - 1,
            grids.len(),
            motions.len()
        )));
    }
    let spec = grids[0].spec();
    if let Some(g) = grids.iter().find(|g| g.spec() != spec) {
        return Err(Error::contract(format!(
            "all grids must share one spec; found {:?} and {:?}",
            spec,
            g.spec()
        )));
    }
    let mut out = Vec::with_capacity(grids.len());
    for (k, grid) in grids.iter().enumerate() {
        if k + 1 == grids.len() {
            out.push(grid.clone());
        } else {
            out.push(align(grid, &motions[k]));
        }
    }
    Ok(out)
}
