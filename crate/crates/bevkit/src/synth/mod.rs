//! Deterministic synthetic scenes: moving boxes with persistent instance
//! ids, instance rasters, ground-truth backward flows, ego trajectories,
//! and rasterized map elements.
//!
//! Scenes provide the ground truth every other module is tested against.
//! Boxes and rasters live in the present ego frame; per-timestamp
//! [`EgoPose`] values map each frame's ego coordinates into the present
//! frame, matching the temporal module's convention.
//!
//! Two motion modes exist. Integer mode snaps agent and ego velocities to
//! whole cells per frame, which makes consecutive instance rasters exact
//! translations of each other and turns the flow/warp round trip into a
//! bitwise oracle. Continuous mode samples free velocities and exercises
//! interpolation tolerances instead.

mod io;

pub use io::{read_boxes, read_scene, write_scene};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{DetectionBox, InstanceSegFrame};
use crate::future::FlowField;
use crate::grid::{BEVGrid, GridSpec};
use crate::temporal::EgoPose;

const PLACEMENT_ATTEMPTS: usize = 200;
const AGENT_CLEARANCE_M: f64 = 0.5;

/// How agent and ego velocities are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionMode {
    /// Velocities snapped to whole motion-grid cells per frame.
    IntegerCell,
    /// Unconstrained velocities and yaw rates.
    Continuous,
}

impl MotionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionMode::IntegerCell => "integer",
            MotionMode::Continuous => "continuous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "integer" => Ok(MotionMode::IntegerCell),
            "continuous" => Ok(MotionMode::Continuous),
            other => Err(Error::config(format!("unknown motion mode `{other}`"))),
        }
    }
}

/// Everything the generator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    /// Past frames including the present.
    pub past_frames: usize,
    /// Future frames to predict.
    pub future_frames: usize,
    pub frame_period_s: f64,
    pub agent_count: usize,
    pub agent_classes: Vec<String>,
    /// Longitudinal size range, meters.
    pub agent_length_range: (f64, f64),
    /// Lateral size range, meters.
    pub agent_width_range: (f64, f64),
    pub agent_height_range: (f64, f64),
    pub agent_speed_range: (f64, f64),
    /// Yaw rate range (rad/s); continuous mode only.
    pub agent_yaw_rate_range: (f64, f64),
    pub ego_speed_range: (f64, f64),
    /// Ego turn rate range (rad/s); continuous mode only.
    pub ego_turn_rate_range: (f64, f64),
    pub motion_mode: MotionMode,
    pub map_divider_count: usize,
    pub map_crossing_count: usize,
    pub detection_spec: GridSpec,
    pub map_spec: GridSpec,
    pub motion_spec: GridSpec,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            past_frames: 3,
            future_frames: 4,
            frame_period_s: 0.5,
            agent_count: 8,
            agent_classes: vec!["car".to_string(), "truck".to_string()],
            agent_length_range: (3.8, 6.0),
            agent_width_range: (1.7, 2.4),
            agent_height_range: (1.4, 2.2),
            agent_speed_range: (0.0, 8.0),
            agent_yaw_rate_range: (-0.3, 0.3),
            ego_speed_range: (0.0, 5.0),
            ego_turn_rate_range: (-0.2, 0.2),
            motion_mode: MotionMode::IntegerCell,
            map_divider_count: 4,
            map_crossing_count: 3,
            detection_spec: GridSpec::centered(51.2, 0.8).expect("valid default"),
            map_spec: GridSpec::new(-30.0, 30.0, -15.0, 15.0, 0.15).expect("valid default"),
            motion_spec: GridSpec::centered(50.0, 0.5).expect("valid default"),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.past_frames < 1 {
            return Err(Error::config("past_frames must be at least 1"));
        }
        if self.future_frames < 1 {
            return Err(Error::config("future_frames must be at least 1"));
        }
        if !self.frame_period_s.is_finite() || self.frame_period_s <= 0.0 {
            return Err(Error::config("frame_period_s must be positive"));
        }
        if self.agent_classes.is_empty() {
            return Err(Error::config("agent_classes must not be empty"));
        }
        for (name, (lo, hi)) in [
            ("agent_length_range", self.agent_length_range),
            ("agent_width_range", self.agent_width_range),
            ("agent_height_range", self.agent_height_range),
            ("agent_speed_range", self.agent_speed_range),
            ("ego_speed_range", self.ego_speed_range),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 {
                return Err(Error::config(format!("{name} ({lo}, {hi}) is invalid")));
            }
        }
        Ok(())
    }

    /// Total number of timestamps: past (with present) plus future.
    pub fn total_frames(&self) -> usize {
        self.past_frames + self.future_frames
    }
}

/// Scene-level metadata that survives serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInfo {
    pub seed: u64,
    pub past_frames: usize,
    pub future_frames: usize,
    pub frame_period_s: f64,
    pub motion_mode: MotionMode,
    pub detection_spec: GridSpec,
    pub map_spec: GridSpec,
    pub motion_spec: GridSpec,
}

impl SceneInfo {
    pub fn total_frames(&self) -> usize {
        self.past_frames + self.future_frames
    }

    /// Index of the present frame within the timestamp axis.
    pub fn present_index(&self) -> usize {
        self.past_frames - 1
    }
}

/// A box carrying its persistent instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedBox {
    pub instance_id: u32,
    pub bev_box: DetectionBox,
}

/// Generated ground truth: per-timestamp boxes, poses, instance rasters,
/// and the static map raster (channels: divider, crossing, boundary).
#[derive(Debug, Clone)]
pub struct Scene {
    pub info: SceneInfo,
    /// Per-timestamp box lists in present-frame coordinates.
    pub boxes: Vec<Vec<TrackedBox>>,
    /// Per-timestamp motions mapping that frame's ego coordinates into the
    /// present frame.
    pub ego_poses: Vec<EgoPose>,
    /// Per-timestamp instance rasters on the motion grid.
    pub instance_frames: Vec<InstanceSegFrame>,
    /// Static semantic map on the map grid, 3 channels.
    pub map_raster: BEVGrid,
}

/// Number of semantic map classes (divider, pedestrian crossing, boundary).
pub const MAP_CLASSES: usize = 3;

/// Class names matching the map raster channels.
pub const MAP_CLASS_NAMES: [&str; MAP_CLASSES] = ["divider", "ped_crossing", "boundary"];

impl Scene {
    /// Plain detection boxes of one timestamp.
    pub fn detection_boxes(&self, t: usize) -> Vec<DetectionBox> {
        self.boxes[t].iter().map(|b| b.bev_box.clone()).collect()
    }

    /// Whether any instance raster differs from the present one onward
    /// (i.e. the prediction horizon contains motion).
    pub fn has_moving_agent(&self) -> bool {
        let p = self.info.present_index();
        self.instance_frames[p..].windows(2).any(|w| w[0] != w[1])
    }
}

struct Agent {
    id: u32,
    class: String,
    width: f64,
    length: f64,
    height: f64,
    yaw: f64,
    yaw_rate: f64,
    start: (f64, f64),
    velocity: (f64, f64),
}

impl Agent {
    fn position(&self, t: usize, period: f64) -> (f64, f64) {
        let dt = t as f64 * period;
        (
            self.start.0 + self.velocity.0 * dt,
            self.start.1 + self.velocity.1 * dt,
        )
    }

    fn yaw_at(&self, t: usize, period: f64) -> f64 {
        self.yaw + self.yaw_rate * t as f64 * period
    }

    fn half_diagonal(&self) -> f64 {
        (self.length * self.length + self.width * self.width).sqrt() / 2.0
    }

    fn boxed(&self, t: usize, period: f64) -> TrackedBox {
        let (x, y) = self.position(t, period);
        TrackedBox {
            instance_id: self.id,
            bev_box: DetectionBox {
                x,
                y,
                z: self.height / 2.0,
                width: self.width,
                length: self.length,
                height: self.height,
                yaw: self.yaw_at(t, period),
                vx: self.velocity.0,
                vy: self.velocity.1,
                class: self.class.clone(),
                score: 1.0,
            },
        }
    }
}

fn sample_range(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Generate a scene. The same config (seed included) always produces a
/// bitwise-identical scene.
pub fn generate(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let frames = config.total_frames();
    let period = config.frame_period_s;
    let spec = config.motion_spec;
    let cell = spec.cell_size();

    let mut agents: Vec<Agent> = Vec::with_capacity(config.agent_count);
    for idx in 0..config.agent_count {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let class =
                config.agent_classes[rng.random_range(0..config.agent_classes.len())].clone();
            let length = sample_range(&mut rng, config.agent_length_range);
            let width = sample_range(&mut rng, config.agent_width_range);
            let height = sample_range(&mut rng, config.agent_height_range);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);

            let (velocity, yaw_rate) = match config.motion_mode {
                MotionMode::IntegerCell => {
                    // Per-axis whole cells per frame; the speed range lower
                    // bound is only honored in continuous mode.
                    let max_cells = (config.agent_speed_range.1 * period / cell).floor() as i64;
                    let kx = rng.random_range(-max_cells..=max_cells);
                    let ky = rng.random_range(-max_cells..=max_cells);
                    ((kx as f64 * cell / period, ky as f64 * cell / period), 0.0)
                }
                MotionMode::Continuous => {
                    let speed = sample_range(&mut rng, config.agent_speed_range);
                    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let yaw_rate = sample_range(&mut rng, config.agent_yaw_rate_range);
                    ((speed * heading.cos(), speed * heading.sin()), yaw_rate)
                }
            };

            let margin = (length * length + width * width).sqrt() / 2.0 + cell;
            let span = period * (frames - 1) as f64;
            let (dx, dy) = (velocity.0 * span, velocity.1 * span);
            let x_lo = spec.x_min() + margin - dx.min(0.0);
            let x_hi = spec.x_max() - margin - dx.max(0.0);
            let y_lo = spec.y_min() + margin - dy.min(0.0);
            let y_hi = spec.y_max() - margin - dy.max(0.0);
            if x_lo >= x_hi || y_lo >= y_hi {
                continue;
            }
            let start = (rng.random_range(x_lo..x_hi), rng.random_range(y_lo..y_hi));

            let candidate = Agent {
                id: (idx + 1) as u32,
                class,
                width,
                length,
                height,
                yaw,
                yaw_rate,
                start,
                velocity,
            };
            let collides = agents.iter().any(|other| {
                (0..frames).any(|t| {
                    let a = candidate.position(t, period);
                    let b = other.position(t, period);
                    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                    d < candidate.half_diagonal() + other.half_diagonal() + AGENT_CLEARANCE_M
                })
            });
            if !collides {
                agents.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::generation(format!(
                "could not place agent {} of {}: agents cannot fit the extent with the configured speeds",
                idx + 1,
                config.agent_count
            )));
        }
    }

    let ego_poses = generate_ego(&mut rng, config)?;

    let boxes: Vec<Vec<TrackedBox>> = (0..frames)
        .map(|t| agents.iter().map(|a| a.boxed(t, period)).collect())
        .collect();
    let instance_frames: Vec<InstanceSegFrame> = boxes
        .iter()
        .map(|frame| rasterize_boxes(frame, &spec))
        .collect();
    let map_raster = generate_map(&mut rng, config);

    Ok(Scene {
        info: SceneInfo {
            seed: config.seed,
            past_frames: config.past_frames,
            future_frames: config.future_frames,
            frame_period_s: period,
            motion_mode: config.motion_mode,
            detection_spec: config.detection_spec,
            map_spec: config.map_spec,
            motion_spec: config.motion_spec,
        },
        boxes,
        ego_poses,
        instance_frames,
        map_raster,
    })
}

/// Ego world trajectory converted to direct frame-to-present motions.
fn generate_ego(rng: &mut ChaCha8Rng, config: &SceneConfig) -> Result<Vec<EgoPose>> {
    let frames = config.total_frames();
    let period = config.frame_period_s;
    let cell = config.motion_spec.cell_size();
    let present = config.past_frames - 1;

    // World positions and headings per timestamp.
    let mut positions = Vec::with_capacity(frames);
    let mut headings = Vec::with_capacity(frames);
    match config.motion_mode {
        MotionMode::IntegerCell => {
            let max_cells = (config.ego_speed_range.1 * period / cell).floor() as i64;
            let ex = rng.random_range(-max_cells..=max_cells);
            let ey = rng.random_range(-max_cells..=max_cells);
            for t in 0..frames {
                positions.push((t as f64 * ex as f64 * cell, t as f64 * ey as f64 * cell));
                headings.push(0.0);
            }
        }
        MotionMode::Continuous => {
            let speed = sample_range(rng, config.ego_speed_range);
            let turn = sample_range(rng, config.ego_turn_rate_range);
            let mut pos = (0.0, 0.0);
            let mut heading = 0.0f64;
            for _ in 0..frames {
                positions.push(pos);
                headings.push(heading);
                pos.0 += speed * heading.cos() * period;
                pos.1 += speed * heading.sin() * period;
                heading += turn * period;
            }
        }
    }

    // Direct motion frame t -> present: theta = h_t - h_p,
    // translation = R(-h_p) (p_t - p_p).
    let hp = headings[present];
    let pp = positions[present];
    let (sin, cos) = (-hp).sin_cos();
    (0..frames)
        .map(|t| {
            let dx = positions[t].0 - pp.0;
            let dy = positions[t].1 - pp.1;
            EgoPose::new(headings[t] - hp, cos * dx - sin * dy, sin * dx + cos * dy)
        })
        .collect()
}

fn generate_map(rng: &mut ChaCha8Rng, config: &SceneConfig) -> BEVGrid {
    let spec = config.map_spec;
    let (ny, nx) = (spec.ny(), spec.nx());
    let mut map = BEVGrid::zeros(spec, MAP_CLASSES);
    // Lane dividers: one-cell-wide vertical polylines at random columns.
    for _ in 0..config.map_divider_count {
        let j = rng.random_range(0..nx);
        for i in 0..ny {
            map.set(i, j, 0, 1.0);
        }
    }
    // Pedestrian crossings: filled axis-aligned rectangles.
    for _ in 0..config.map_crossing_count {
        let w_m = rng.random_range(2.0..5.0);
        let h_m = rng.random_range(2.0..4.0);
        let cx = rng.random_range(spec.x_min()..spec.x_max());
        let cy = rng.random_range(spec.y_min()..spec.y_max());
        for i in 0..ny {
            for j in 0..nx {
                let (x, y) = spec.cell_center(i, j);
                if (x - cx).abs() < w_m / 2.0 && (y - cy).abs() < h_m / 2.0 {
                    map.set(i, j, 1, 1.0);
                }
            }
        }
    }
    // Lane boundaries: extent-hugging frame.
    for j in 0..nx {
        map.set(0, j, 2, 1.0);
        map.set(ny - 1, j, 2, 1.0);
    }
    for i in 0..ny {
        map.set(i, 0, 2, 1.0);
        map.set(i, nx - 1, 2, 1.0);
    }
    map
}

/// Paint every box footprint onto an instance raster: a cell takes a box's
/// id when its center falls inside the rotated, half-open footprint
/// (`[-l/2, l/2)` longitudinal, `[-w/2, w/2)` lateral). Later boxes win
/// overlapping cells.
pub fn rasterize_boxes(boxes: &[TrackedBox], spec: &GridSpec) -> InstanceSegFrame {
    let (ny, nx) = (spec.ny(), spec.nx());
    let cell = spec.cell_size();
    let mut frame = InstanceSegFrame::zeros(ny, nx);
    for tracked in boxes {
        let b = &tracked.bev_box;
        let radius = (b.length * b.length + b.width * b.width).sqrt() / 2.0;
        let j0 = (((b.x - radius) - spec.x_min()) / cell).floor().max(0.0) as usize;
        let i0 = (((b.y - radius) - spec.y_min()) / cell).floor().max(0.0) as usize;
        let j1 = ((((b.x + radius) - spec.x_min()) / cell).ceil().max(0.0) as usize).min(nx);
        let i1 = ((((b.y + radius) - spec.y_min()) / cell).ceil().max(0.0) as usize).min(ny);
        let (sin, cos) = b.yaw.sin_cos();
        for i in i0..i1 {
            for j in j0..j1 {
                let (x, y) = spec.cell_center(i, j);
                let dx = x - b.x;
                let dy = y - b.y;
                let longitudinal = cos * dx + sin * dy;
                let lateral = -sin * dx + cos * dy;
                if longitudinal >= -b.length / 2.0
                    && longitudinal < b.length / 2.0
                    && lateral >= -b.width / 2.0
                    && lateral < b.width / 2.0
                {
                    frame.set(i, j, tracked.instance_id);
                }
            }
        }
    }
    frame
}

/// Sentinel displacement pointing far off the lattice so warped reads fill
/// with background.
fn off_lattice_flow(spec: &GridSpec) -> f32 {
    2.0 * (spec.nx() + spec.ny()) as f32
}

/// Ground-truth backward flow for future step `k` (from timestamp
/// `present + k` to `present + k + 1`).
///
/// Cells inside an instance's destination footprint carry that instance's
/// displacement in cells. Cells that are background at both timestamps
/// carry zero flow. Cells an agent vacated read from far outside the
/// lattice, so the warp fills them with background; zero flow there would
/// drag the stale source content along and break the round trip.
pub fn gt_flow(scene: &Scene, k: usize) -> Result<FlowField> {
    if k >= scene.info.future_frames {
        return Err(Error::contract(format!(
            "flow step {k} out of range for horizon {}",
            scene.info.future_frames
        )));
    }
    let t0 = scene.info.present_index() + k;
    let t1 = t0 + 1;
    let spec = &scene.info.motion_spec;
    let cell = spec.cell_size();
    let src = &scene.instance_frames[t0];
    let dst = &scene.instance_frames[t1];

    // Per-instance displacement in cells between the two timestamps.
    let mut displacement: std::collections::HashMap<u32, (f32, f32)> =
        std::collections::HashMap::new();
    for tracked in &scene.boxes[t1] {
        if let Some(prev) = scene.boxes[t0]
            .iter()
            .find(|b| b.instance_id == tracked.instance_id)
        {
            let dx = (tracked.bev_box.x - prev.bev_box.x) / cell;
            let dy = (tracked.bev_box.y - prev.bev_box.y) / cell;
            displacement.insert(tracked.instance_id, (dx as f32, dy as f32));
        }
    }

    let (ny, nx) = (spec.ny(), spec.nx());
    let sentinel = off_lattice_flow(spec);
    let mut flow = FlowField::zeros(ny, nx);
    for i in 0..ny {
        for j in 0..nx {
            let id = dst.get(i, j);
            if id != 0 {
                if let Some(&(dx, dy)) = displacement.get(&id) {
                    flow.set(i, j, dx, dy);
                }
            } else if src.get(i, j) != 0 {
                flow.set(i, j, sentinel, sentinel);
            }
        }
    }
    Ok(flow)
}

/// All `T` ground-truth flows of the prediction horizon.
pub fn gt_flows(scene: &Scene) -> Result<Vec<FlowField>> {
    (0..scene.info.future_frames)
        .map(|k| gt_flow(scene, k))
        .collect()
}
