//! Plain-text run configuration.
//!
//! The file format is sectioned key-value text, strict enough to parse in
//! any language with string splitting:
//!
//! ```text
//! # comment
//! [scene]
//! seed = 7
//! agent_count = 8
//! [grid.detection]
//! x_min = -51.2
//! x_max = 51.2
//! y_min = -51.2
//! y_max = 51.2
//! cell_size = 0.8
//! ```
//!
//! Unknown keys are rejected so typos surface instead of silently keeping
//! defaults. Every key is optional; defaults reproduce the reference grid
//! layout (detection 128x128 at 0.8 m, map 400x200 at 0.15 m, motion
//! 200x200 at 0.5 m, three past frames, four future frames).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bevkit::geometry::{Camera, CameraRig, DepthBins, DEFAULT_STRIDE};
use bevkit::grid::GridSpec;
use bevkit::synth::{MotionMode, SceneConfig};

/// Which flow generator drives the rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutKind {
    /// Ground-truth flows from the scene.
    GtFlow,
    /// The static baseline: zero flow everywhere.
    ZeroFlow,
}

impl RolloutKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gt-flow" => Ok(RolloutKind::GtFlow),
            "zero-flow" => Ok(RolloutKind::ZeroFlow),
            other => bail!("unknown rollout kind `{other}` (expected gt-flow or zero-flow)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RolloutKind::GtFlow => "gt-flow",
            RolloutKind::ZeroFlow => "zero-flow",
        }
    }
}

/// Synthetic feature-map dimensions fed through the view transformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub stride: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            height: 16,
            width: 44,
            channels: 8,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Ring-rig camera parameters; explicit `[camera.N]` sections override it.
#[derive(Debug, Clone, PartialEq)]
pub struct RigConfig {
    pub cameras: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub height: f64,
    pub explicit: Vec<ExplicitCamera>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub yaw: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            cameras: 6,
            fx: 280.0,
            fy: 280.0,
            cx: 352.0,
            cy: 128.0,
            radius: 1.5,
            height: 1.6,
            explicit: Vec::new(),
        }
    }
}

impl RigConfig {
    pub fn build(&self) -> Result<CameraRig> {
        if !self.explicit.is_empty() {
            let cameras = self
                .explicit
                .iter()
                .map(|c| Camera::looking(c.fx, c.fy, c.cx, c.cy, c.yaw, [c.x, c.y, c.z]))
                .collect::<bevkit::Result<Vec<_>>>()?;
            return Ok(CameraRig::new(cameras)?);
        }
        Ok(CameraRig::ring(
            self.cameras,
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.radius,
            self.height,
        )?)
    }
}

/// Pipeline stand-in behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Gaussian noise (meters / radians / m/s scale) applied to the
    /// detection stand-in predictions; 0 keeps them exact.
    pub detection_noise: f64,
    /// Probability of dropping a foreground map cell in the map stand-in.
    pub map_noise: f64,
    pub rollout: RolloutKind,
    /// Latent dimension of the sampled per-cell latent map.
    pub latent_dim: usize,
    /// Scale-NMS distance threshold; 0 disables suppression.
    pub nms_threshold: f64,
    /// Per-class center scale factors for scale-NMS.
    pub nms_scales: BTreeMap<String, f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detection_noise: 0.0,
            map_noise: 0.0,
            rollout: RolloutKind::GtFlow,
            latent_dim: 32,
            nms_threshold: 0.0,
            nms_scales: BTreeMap::new(),
        }
    }
}

/// Benchmark workload.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![128, 256],
            reps: 20,
        }
    }
}

/// Full run configuration: scene generation, depth discretization, rig,
/// synthetic features, pipeline stand-ins, and the benchmark workload.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub depth_bins: DepthBins,
    pub features: FeatureConfig,
    pub rig: RigConfig,
    pub pipeline: PipelineConfig,
    pub bench: BenchConfig,
    /// The raw text the config was parsed from; hashed into manifests.
    pub source_text: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: SceneConfig::default(),
            depth_bins: DepthBins::new(1.0, 60.0, 59).expect("valid default"),
            features: FeatureConfig::default(),
            rig: RigConfig::default(),
            pipeline: PipelineConfig::default(),
            bench: BenchConfig::default(),
            source_text: String::new(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = RunConfig {
            source_text: text.to_string(),
            ..RunConfig::default()
        };
        let mut depth = (1.0, 60.0, 59usize);
        let mut section = String::new();
        let mut cameras: BTreeMap<usize, ExplicitCamera> = BTreeMap::new();

        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section `{line}`", ln + 1))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got `{line}`", ln + 1))?;
            let key = key.trim();
            let value = value.trim();
            apply_key(&mut config, &mut depth, &mut cameras, &section, key, value)
                .with_context(|| format!("line {}: key `{key}`", ln + 1))?;
        }

        config.depth_bins = DepthBins::new(depth.0, depth.1, depth.2)?;
        config.rig.explicit = cameras.into_values().collect();
        Ok(config)
    }
}

fn parse<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("bad value `{value}`: {e}"))
}

fn grid_section<'a>(config: &'a mut RunConfig, which: &str) -> &'a mut GridSpec {
    match which {
        "detection" => &mut config.scene.detection_spec,
        "map" => &mut config.scene.map_spec,
        _ => &mut config.scene.motion_spec,
    }
}

fn apply_key(
    config: &mut RunConfig,
    depth: &mut (f64, f64, usize),
    cameras: &mut BTreeMap<usize, ExplicitCamera>,
    section: &str,
    key: &str,
    value: &str,
) -> Result<()> {
    if let Some(which) = section.strip_prefix("grid.") {
        if !["detection", "map", "motion"].contains(&which) {
            bail!("unknown grid section `{section}`");
        }
        let spec = grid_section(config, which);
        let (mut x_min, mut x_max) = (spec.x_min(), spec.x_max());
        let (mut y_min, mut y_max) = (spec.y_min(), spec.y_max());
        let mut cell = spec.cell_size();
        match key {
            "x_min" => x_min = parse(value)?,
            "x_max" => x_max = parse(value)?,
            "y_min" => y_min = parse(value)?,
            "y_max" => y_max = parse(value)?,
            "cell_size" => cell = parse(value)?,
            other => bail!("unknown key `{other}` in [{section}]"),
        }
        *grid_section(config, which) = GridSpec::new(x_min, x_max, y_min, y_max, cell)?;
        return Ok(());
    }
    if let Some(index) = section.strip_prefix("camera.") {
        let index: usize = parse(index)?;
        let cam = cameras.entry(index).or_insert(ExplicitCamera {
            fx: 280.0,
            fy: 280.0,
            cx: 352.0,
            cy: 128.0,
            yaw: 0.0,
            x: 0.0,
            y: 0.0,
            z: 1.6,
        });
        match key {
            "fx" => cam.fx = parse(value)?,
            "fy" => cam.fy = parse(value)?,
            "cx" => cam.cx = parse(value)?,
            "cy" => cam.cy = parse(value)?,
            "yaw" => cam.yaw = parse(value)?,
            "x" => cam.x = parse(value)?,
            "y" => cam.y = parse(value)?,
            "z" => cam.z = parse(value)?,
            other => bail!("unknown key `{other}` in [{section}]"),
        }
        return Ok(());
    }
    match section {
        "scene" => {
            let s = &mut config.scene;
            match key {
                "seed" => s.seed = parse(value)?,
                "past_frames" => s.past_frames = parse(value)?,
                "future_frames" => s.future_frames = parse(value)?,
                "frame_period_s" => s.frame_period_s = parse(value)?,
                "agent_count" => s.agent_count = parse(value)?,
                "agent_classes" => {
                    s.agent_classes = value.split(',').map(|c| c.trim().to_string()).collect()
                }
                "motion_mode" => s.motion_mode = MotionMode::parse(value)?,
                "agent_speed_min" => s.agent_speed_range.0 = parse(value)?,
                "agent_speed_max" => s.agent_speed_range.1 = parse(value)?,
                "agent_length_min" => s.agent_length_range.0 = parse(value)?,
                "agent_length_max" => s.agent_length_range.1 = parse(value)?,
                "agent_width_min" => s.agent_width_range.0 = parse(value)?,
                "agent_width_max" => s.agent_width_range.1 = parse(value)?,
                "agent_height_min" => s.agent_height_range.0 = parse(value)?,
                "agent_height_max" => s.agent_height_range.1 = parse(value)?,
                "agent_yaw_rate_min" => s.agent_yaw_rate_range.0 = parse(value)?,
                "agent_yaw_rate_max" => s.agent_yaw_rate_range.1 = parse(value)?,
                "ego_speed_min" => s.ego_speed_range.0 = parse(value)?,
                "ego_speed_max" => s.ego_speed_range.1 = parse(value)?,
                "ego_turn_rate_min" => s.ego_turn_rate_range.0 = parse(value)?,
                "ego_turn_rate_max" => s.ego_turn_rate_range.1 = parse(value)?,
                "map_dividers" => s.map_divider_count = parse(value)?,
                "map_crossings" => s.map_crossing_count = parse(value)?,
                other => bail!("unknown key `{other}` in [scene]"),
            }
        }
        "depth_bins" => match key {
            "d_min" => depth.0 = parse(value)?,
            "d_max" => depth.1 = parse(value)?,
            "count" => depth.2 = parse(value)?,
            other => bail!("unknown key `{other}` in [depth_bins]"),
        },
        "features" => {
            let f = &mut config.features;
            match key {
                "height" => f.height = parse(value)?,
                "width" => f.width = parse(value)?,
                "channels" => f.channels = parse(value)?,
                "stride" => f.stride = parse(value)?,
                other => bail!("unknown key `{other}` in [features]"),
            }
        }
        "rig" => {
            let r = &mut config.rig;
            match key {
                "cameras" => r.cameras = parse(value)?,
                "fx" => r.fx = parse(value)?,
                "fy" => r.fy = parse(value)?,
                "cx" => r.cx = parse(value)?,
                "cy" => r.cy = parse(value)?,
                "radius" => r.radius = parse(value)?,
                "height" => r.height = parse(value)?,
                other => bail!("unknown key `{other}` in [rig]"),
            }
        }
        "pipeline" => {
            let p = &mut config.pipeline;
            match key {
                "detection_noise" => p.detection_noise = parse(value)?,
                "map_noise" => p.map_noise = parse(value)?,
                "rollout" => p.rollout = RolloutKind::parse(value)?,
                "latent_dim" => p.latent_dim = parse(value)?,
                "nms_threshold" => p.nms_threshold = parse(value)?,
                other => {
                    if let Some(class) = other.strip_prefix("nms_scale_") {
                        p.nms_scales.insert(class.to_string(), parse(value)?);
                    } else {
                        bail!("unknown key `{other}` in [pipeline]");
                    }
                }
            }
        }
        "bench" => {
            let b = &mut config.bench;
            match key {
                "sizes" => {
                    b.sizes = value
                        .split(',')
                        .map(|v| parse::<usize>(v.trim()))
                        .collect::<Result<_>>()?
                }
                "reps" => b.reps = parse(value)?,
                other => bail!("unknown key `{other}` in [bench]"),
            }
        }
        "" => bail!("key `{key}` appears before any [section]"),
        other => bail!("unknown section `[{other}]`"),
    }
    Ok(())
}

/// Parse a `x_min,x_max,y_min,y_max,cell_size` command-line override.
pub fn parse_spec_override(value: &str) -> Result<GridSpec> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|v| parse::<f64>(v.trim()))
        .collect::<Result<_>>()?;
    if parts.len() != 5 {
        bail!(
            "grid spec override wants 5 comma-separated numbers, got {}",
            parts.len()
        );
    }
    Ok(GridSpec::new(
        parts[0], parts[1], parts[2], parts[3], parts[4],
    )?)
}
