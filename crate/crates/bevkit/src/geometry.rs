//! Camera geometry: frustum point generation, categorical-depth lifting of
//! image features into an ego-frame point cloud, and scatter-reduce pillar
//! pooling into a BEV grid.
//!
//! Conventions, stated once so every oracle can be written against them:
//!
//! - Camera frames are right-handed with x right, y down, and the optical
//!   axis along +z. Extrinsics map camera coordinates to ego coordinates.
//! - The ego frame has x forward, y left, z up.
//! - A feature pixel `(u, v)` of a map produced at `stride` corresponds to
//!   the image position `((u + 0.5) * stride, (v + 0.5) * stride)`.
//! - Points are emitted camera-major, then row, column, depth bin:
//!   index `((m * H + v) * W + u) * D + k`.

use crate::error::{Error, Result};
use crate::grid::{BEVGrid, GridSpec};

/// Image-to-feature downsampling factor of the feature maps.
pub const DEFAULT_STRIDE: f64 = 16.0;

/// Ego-frame z interval (meters) outside which lifted points are dropped
/// during pooling.
pub const DEFAULT_Z_BOUNDS: (f64, f64) = (-5.0, 3.0);

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Pinhole intrinsics plus a camera-to-ego rigid pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-ego rotation, row major.
    pub rotation: [[f64; 3]; 3],
    /// Camera-to-ego translation in meters.
    pub translation: [f64; 3],
}

impl Camera {
    /// Validate focal lengths and rotation orthonormality.
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::config(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        for row in &rotation {
            for v in row {
                if !v.is_finite() {
                    return Err(Error::config("rotation contains non-finite values"));
                }
            }
        }
        if !translation.iter().all(|v| v.is_finite()) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::config("camera parameters must be finite"));
        }
        // R^T R must be the identity within tolerance.
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][a] * rotation[k][b]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                if (dot - expected).abs() > ORTHONORMAL_TOL {
                    return Err(Error::config(format!(
                        "rotation is not orthonormal: (R^T R)[{a}][{b}] = {dot}"
                    )));
                }
            }
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        })
    }

    /// Camera mounted at `translation`, yawed by `yaw` about the ego up
    /// axis; `yaw = 0` looks along ego +x. Maps camera axes (x right,
    /// y down, z forward) onto the ego frame.
    pub fn looking(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        yaw: f64,
        translation: [f64; 3],
    ) -> Result<Self> {
        // Base: cam x -> ego -y, cam y -> ego -z, cam z -> ego x.
        let base = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let (sin, cos) = yaw.sin_cos();
        let yaw_rot = [[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]];
        let mut rotation = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r][c] = (0..3).map(|k| yaw_rot[r][k] * base[k][c]).sum();
            }
        }
        Camera::new(fx, fy, cx, cy, rotation, translation)
    }

    /// Unproject image position `(u_img, v_img)` at depth `d` (meters along
    /// the optical axis) into the ego frame.
    #[inline]
    pub fn unproject(&self, u_img: f64, v_img: f64, d: f64) -> [f64; 3] {
        let xc = (u_img - self.cx) / self.fx * d;
        let yc = (v_img - self.cy) / self.fy * d;
        let zc = d;
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0] * xc + r[0][1] * yc + r[0][2] * zc + t[0],
            r[1][0] * xc + r[1][1] * yc + r[1][2] * zc + t[1],
            r[2][0] * xc + r[2][1] * yc + r[2][2] * zc + t[2],
        ]
    }
}

/// The multi-camera rig.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::config("camera rig needs at least one camera"));
        }
        Ok(CameraRig { cameras })
    }

    /// Ring of `count` identical cameras yawed at even angular spacing.
    pub fn ring(
        count: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        radius: f64,
        height: f64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("camera rig needs at least one camera"));
        }
        let cameras = (0..count)
            .map(|k| {
                let yaw = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let (sin, cos) = yaw.sin_cos();
                Camera::looking(fx, fy, cx, cy, yaw, [radius * cos, radius * sin, height])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CameraRig { cameras })
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// Uniform categorical depth discretization: `count` bins spanning
/// `[d_min, d_max]`, sampled at bin midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBins {
    d_min: f64,
    d_max: f64,
    count: usize,
}

impl DepthBins {
    pub fn new(d_min: f64, d_max: f64, count: usize) -> Result<Self> {
        if !(d_min.is_finite() && d_max.is_finite()) {
            return Err(Error::config("depth range must be finite"));
        }
        if !(0.0 < d_min && d_min < d_max) {
            return Err(Error::config(format!(
                "depth range must satisfy 0 < d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        if count == 0 {
            return Err(Error::config("depth bin count must be at least 1"));
        }
        Ok(DepthBins {
            d_min,
            d_max,
            count,
        })
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Midpoint depth of bin `k`.
    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        debug_assert!(k < self.count);
        let step = (self.d_max - self.d_min) / self.count as f64;
        self.d_min + (k as f64 + 0.5) * step
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.center(k)).collect()
    }
}

/// Per-camera image features plus a categorical depth distribution.
///
/// Features are `M x H x W x C`, depth `M x H x W x D`, both row major with
/// the camera index outermost. Depth distributions are renormalized per
/// pixel on ingestion, so after construction each pixel sums to 1.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    cameras: usize,
    height: usize,
    width: usize,
    channels: usize,
    depth_bins: usize,
    features: Vec<f32>,
    depth: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        cameras: usize,
        height: usize,
        width: usize,
        channels: usize,
        depth_bins: usize,
        features: Vec<f32>,
        mut depth: Vec<f32>,
    ) -> Result<Self> {
        let pixels = cameras
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::contract("feature map dimensions overflow"))?;
        if pixels == 0 || channels == 0 || depth_bins == 0 {
            return Err(Error::contract("feature map dimensions must be positive"));
        }
        if features.len() != pixels * channels {
            return Err(Error::contract(format!(
                "feature length {} does not match {cameras}x{height}x{width}x{channels}",
                features.len()
            )));
        }
        if depth.len() != pixels * depth_bins {
            return Err(Error::contract(format!(
                "depth length {} does not match {cameras}x{height}x{width}x{depth_bins}",
                depth.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("features contain non-finite values"));
        }
        for (p, pixel) in depth.chunks_exact_mut(depth_bins).enumerate() {
            let mut sum = 0.0f64;
            for v in pixel.iter() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::contract(format!(
                        "depth distribution at pixel {p} contains invalid value {v}"
                    )));
                }
                sum += *v as f64;
            }
            if sum <= 0.0 {
                return Err(Error::contract(format!(
                    "depth distribution at pixel {p} has zero mass"
                )));
            }
            // Renormalize so each pixel's distribution sums to 1.
            let inv = (1.0 / sum) as f32;
            for v in pixel.iter_mut() {
                *v *= inv;
            }
        }
        Ok(FeatureMap {
            cameras,
            height,
            width,
            channels,
            depth_bins,
            features,
            depth,
        })
    }

    pub fn cameras(&self) -> usize {
        self.cameras
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth_bins(&self) -> usize {
        self.depth_bins
    }

    /// Feature vector of pixel `(m, v, u)`.
    #[inline]
    pub fn feature(&self, m: usize, v: usize, u: usize) -> &[f32] {
        let k = ((m * self.height + v) * self.width + u) * self.channels;
        &self.features[k..k + self.channels]
    }

    /// Depth distribution of pixel `(m, v, u)`.
    #[inline]
    pub fn depth_distribution(&self, m: usize, v: usize, u: usize) -> &[f32] {
        let k = ((m * self.height + v) * self.width + u) * self.depth_bins;
        &self.depth[k..k + self.depth_bins]
    }
}

/// Dense ego-frame point cloud produced by lifting.
///
/// Struct-of-arrays layout; point `p` has position `positions[p]`, depth
/// probability `weights[p]`, and feature `features[p*C .. (p+1)*C]`.
/// `channels == 0` indicates a positions-only cloud from [`build_frustum`].
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedCloud {
    pub positions: Vec<[f64; 3]>,
    pub weights: Vec<f32>,
    pub channels: usize,
    pub features: Vec<f32>,
}

impl LiftedCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Empty cloud with a fixed channel count.
    pub fn empty(channels: usize) -> Self {
        LiftedCloud {
            positions: Vec::new(),
            weights: Vec::new(),
            channels,
            features: Vec::new(),
        }
    }
}

/// Feature-map dimensions handed to [`build_frustum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub height: usize,
    pub width: usize,
}

/// Generate the ego-frame positions of every (camera, pixel, depth bin)
/// triple: each feature pixel center is unprojected through the intrinsics
/// at every bin midpoint and moved by the camera-to-ego pose. The returned
/// cloud carries positions and unit weights only.
pub fn build_frustum(
    dims: FeatureDims,
    bins: &DepthBins,
    rig: &CameraRig,
    stride: f64,
) -> LiftedCloud {
    let count = rig.len() * dims.height * dims.width * bins.count();
    let mut positions = Vec::with_capacity(count);
    for camera in rig.cameras() {
        for v in 0..dims.height {
            let v_img = (v as f64 + 0.5) * stride;
            for u in 0..dims.width {
                let u_img = (u as f64 + 0.5) * stride;
                for k in 0..bins.count() {
                    positions.push(camera.unproject(u_img, v_img, bins.center(k)));
                }
            }
        }
    }
    LiftedCloud {
        positions,
        weights: vec![1.0; count],
        channels: 0,
        features: Vec::new(),
    }
}

/// Lift image features into the frustum cloud: every point carries its
/// pixel feature scaled by the depth-bin probability.
pub fn lift(
    features: &FeatureMap,
    bins: &DepthBins,
    rig: &CameraRig,
    stride: f64,
) -> Result<LiftedCloud> {
    if features.cameras() != rig.len() {
        return Err(Error::contract(format!(
            "feature map has {} cameras but the rig has {}",
            features.cameras(),
            rig.len()
        )));
    }
    if features.depth_bins() != bins.count() {
        return Err(Error::contract(format!(
            "feature map has {} depth bins but the discretization has {}",
            features.depth_bins(),
            bins.count()
        )));
    }
    let dims = FeatureDims {
        height: features.height(),
        width: features.width(),
    };
    let mut cloud = build_frustum(dims, bins, rig, stride);
    let channels = features.channels();
    let mut lifted = Vec::with_capacity(cloud.len() * channels);
    let mut weights = Vec::with_capacity(cloud.len());
    for m in 0..features.cameras() {
        for v in 0..features.height() {
            for u in 0..features.width() {
                let pixel = features.feature(m, v, u);
                let dist = features.depth_distribution(m, v, u);
                for &p in dist {
                    weights.push(p);
                    for &f in pixel {
                        lifted.push(f * p);
                    }
                }
            }
        }
    }
    cloud.weights = weights;
    cloud.channels = channels;
    cloud.features = lifted;
    Ok(cloud)
}

/// Sum-pool a lifted cloud into BEV cells with default z bounds.
pub fn pillar_pool(cloud: &LiftedCloud, spec: GridSpec) -> BEVGrid {
    pillar_pool_with_bounds(cloud, spec, DEFAULT_Z_BOUNDS)
}

/// Sum-pool a lifted cloud into BEV cells.
///
/// Every point with `z_min <= z < z_max` whose `(x, y)` lies inside the
/// extent (half-open on the max edges) adds its feature vector to the cell
/// containing it. Points are consumed in storage order, so the per-cell
/// accumulation order is fixed and repeated runs are bitwise identical.
pub fn pillar_pool_with_bounds(
    cloud: &LiftedCloud,
    spec: GridSpec,
    z_bounds: (f64, f64),
) -> BEVGrid {
    let channels = cloud.channels.max(1);
    let mut grid = BEVGrid::zeros(spec, channels);
    let nx = spec.nx();
    let ny = spec.ny();
    let data = grid.data_mut();
    for (p, pos) in cloud.positions.iter().enumerate() {
        let [x, y, z] = *pos;
        if z < z_bounds.0 || z >= z_bounds.1 {
            continue;
        }
        if !spec.contains(x, y) {
            continue;
        }
        let j = (((x - spec.x_min()) / spec.cell_size()).floor() as usize).min(nx - 1);
        let i = (((y - spec.y_min()) / spec.cell_size()).floor() as usize).min(ny - 1);
        let cell = (i * nx + j) * channels;
        if cloud.channels == 0 {
            // Positions-only cloud: pool the weights as occupancy.
            data[cell] += cloud.weights[p];
        } else {
            let feat = &cloud.features[p * channels..(p + 1) * channels];
            for (d, &f) in data[cell..cell + channels].iter_mut().zip(feat) {
                *d += f;
            }
        }
    }
    grid
}
