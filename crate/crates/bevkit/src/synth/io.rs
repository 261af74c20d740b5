//! Scene directory layout.
//!
//! ```text
//! scene/
//!   manifest.txt       key=value metadata (seed, frames, specs, format)
//!   boxes.txt          one box per line: t id class x y z w l h yaw vx vy score
//!   poses.txt          one pose per line: t theta tx ty
//!   instance_TTT.bvg   per-timestamp instance raster on the motion grid
//!   map.bvg            static 3-channel semantic map on the map grid
//! ```
//!
//! Floats are printed with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces the scene bitwise and identical scenes
//! serialize to byte-identical directories.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{DetectionBox, InstanceSegFrame};
use crate::grid::{read_grid, write_grid, GridSpec};
use crate::synth::{MotionMode, Scene, SceneInfo, TrackedBox, MAP_CLASSES};
use crate::temporal::EgoPose;

const MANIFEST: &str = "manifest.txt";
const BOXES: &str = "boxes.txt";
const POSES: &str = "poses.txt";
const MAP: &str = "map.bvg";

fn spec_to_kv(spec: &GridSpec) -> String {
    format!(
        "{} {} {} {} {}",
        spec.x_min(),
        spec.x_max(),
        spec.y_min(),
        spec.y_max(),
        spec.cell_size()
    )
}

fn spec_from_kv(path: &Path, value: &str) -> Result<GridSpec> {
    let parts: Vec<f64> = value
        .split_whitespace()
        .map(|v| v.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path, format!("bad grid spec `{value}`: {e}")))?;
    if parts.len() != 5 {
        return Err(Error::format(
            path,
            format!("grid spec wants 5 fields, got {}", parts.len()),
        ));
    }
    GridSpec::new(parts[0], parts[1], parts[2], parts[3], parts[4])
}

/// Write a scene directory (created if missing). Existing files are
/// replaced atomically.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let info = &scene.info;

    let mut manifest = String::new();
    manifest.push_str("format=BVG1\n");
    manifest.push_str(&format!("seed={}\n", info.seed));
    manifest.push_str(&format!("past_frames={}\n", info.past_frames));
    manifest.push_str(&format!("future_frames={}\n", info.future_frames));
    manifest.push_str(&format!("frame_period_s={}\n", info.frame_period_s));
    manifest.push_str(&format!("motion_mode={}\n", info.motion_mode.as_str()));
    manifest.push_str(&format!(
        "detection_spec={}\n",
        spec_to_kv(&info.detection_spec)
    ));
    manifest.push_str(&format!("map_spec={}\n", spec_to_kv(&info.map_spec)));
    manifest.push_str(&format!("motion_spec={}\n", spec_to_kv(&info.motion_spec)));
    crate::grid::io_write_atomic(&dir.join(MANIFEST), manifest.as_bytes())?;

    let mut boxes = String::from("# t id class x y z w l h yaw vx vy score\n");
    for (t, frame) in scene.boxes.iter().enumerate() {
        for b in frame {
            let v = &b.bev_box;
            boxes.push_str(&format!(
                "{t} {} {} {} {} {} {} {} {} {} {} {} {}\n",
                b.instance_id,
                v.class,
                v.x,
                v.y,
                v.z,
                v.width,
                v.length,
                v.height,
                v.yaw,
                v.vx,
                v.vy,
                v.score
            ));
        }
    }
    crate::grid::io_write_atomic(&dir.join(BOXES), boxes.as_bytes())?;

    let mut poses = String::from("# t theta tx ty\n");
    for (t, p) in scene.ego_poses.iter().enumerate() {
        let (tx, ty) = p.translation();
        poses.push_str(&format!("{t} {} {tx} {ty}\n", p.theta()));
    }
    crate::grid::io_write_atomic(&dir.join(POSES), poses.as_bytes())?;

    for (t, frame) in scene.instance_frames.iter().enumerate() {
        let grid = frame.to_grid(info.motion_spec)?;
        write_grid(&grid, &dir.join(format!("instance_{t:03}.bvg")))?;
    }
    write_grid(&scene.map_raster, &dir.join(MAP))?;
    Ok(())
}

fn manifest_map(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("expected key=value, got `{line}`")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn manifest_get<'a>(path: &Path, map: &'a HashMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::format(path, format!("missing key `{key}`")))
}

fn parse_field<T: std::str::FromStr>(path: &Path, value: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::format(path, format!("bad {what} `{value}`: {e}")))
}

/// Read a scene directory written by [`write_scene`].
pub fn read_scene(dir: &Path) -> Result<Scene> {
    let manifest_path = dir.join(MANIFEST);
    let manifest = manifest_map(&manifest_path)?;
    let format = manifest_get(&manifest_path, &manifest, "format")?;
    if format != "BVG1" {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported format `{format}`"),
        ));
    }
    let info = SceneInfo {
        seed: parse_field(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "seed")?,
            "seed",
        )?,
        past_frames: parse_field(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "past_frames")?,
            "past_frames",
        )?,
        future_frames: parse_field(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "future_frames")?,
            "future_frames",
        )?,
        frame_period_s: parse_field(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "frame_period_s")?,
            "frame_period_s",
        )?,
        motion_mode: MotionMode::parse(manifest_get(&manifest_path, &manifest, "motion_mode")?)?,
        detection_spec: spec_from_kv(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "detection_spec")?,
        )?,
        map_spec: spec_from_kv(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "map_spec")?,
        )?,
        motion_spec: spec_from_kv(
            &manifest_path,
            manifest_get(&manifest_path, &manifest, "motion_spec")?,
        )?,
    };
    if info.past_frames < 1 || info.future_frames < 1 {
        return Err(Error::format(
            &manifest_path,
            "frame counts must be at least 1",
        ));
    }
    let frames = info.total_frames();

    let boxes = read_boxes(&dir.join(BOXES), frames)?;
    let poses = read_poses(&dir.join(POSES), frames)?;
    let mut instance_frames = Vec::with_capacity(frames);
    for t in 0..frames {
        let path = dir.join(format!("instance_{t:03}.bvg"));
        let grid = read_grid(&path, info.motion_spec)?;
        instance_frames.push(InstanceSegFrame::from_grid(&grid)?);
    }
    let map_raster = read_grid(&dir.join(MAP), info.map_spec)?;
    if map_raster.channels() != MAP_CLASSES {
        return Err(Error::format(
            dir.join(MAP),
            format!(
                "map raster wants {MAP_CLASSES} channels, got {}",
                map_raster.channels()
            ),
        ));
    }

    Ok(Scene {
        info,
        boxes,
        ego_poses: poses,
        instance_frames,
        map_raster,
    })
}

/// Read a `boxes.txt`-format file into per-timestamp lists.
pub fn read_boxes(path: &Path, frames: usize) -> Result<Vec<Vec<TrackedBox>>> {
    let text = fs::read_to_string(path)?;
    let mut boxes: Vec<Vec<TrackedBox>> = vec![Vec::new(); frames];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 13 {
            return Err(Error::format(
                path,
                format!("line {}: expected 13 fields, got {}", ln + 1, fields.len()),
            ));
        }
        let t: usize = parse_field(path, fields[0], "timestamp")?;
        if t >= frames {
            return Err(Error::format(
                path,
                format!("line {}: timestamp {t} out of range 0..{frames}", ln + 1),
            ));
        }
        let f = |k: usize, what: &str| -> Result<f64> { parse_field(path, fields[k], what) };
        let tracked = TrackedBox {
            instance_id: parse_field(path, fields[1], "instance id")?,
            bev_box: DetectionBox {
                class: fields[2].to_string(),
                x: f(3, "x")?,
                y: f(4, "y")?,
                z: f(5, "z")?,
                width: f(6, "w")?,
                length: f(7, "l")?,
                height: f(8, "h")?,
                yaw: f(9, "yaw")?,
                vx: f(10, "vx")?,
                vy: f(11, "vy")?,
                score: f(12, "score")?,
            },
        };
        tracked.bev_box.validate()?;
        boxes[t].push(tracked);
    }
    Ok(boxes)
}

fn read_poses(path: &Path, frames: usize) -> Result<Vec<EgoPose>> {
    let text = fs::read_to_string(path)?;
    let mut poses: Vec<Option<EgoPose>> = vec![None; frames];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                format!("line {}: expected 4 fields, got {}", ln + 1, fields.len()),
            ));
        }
        let t: usize = parse_field(path, fields[0], "timestamp")?;
        if t >= frames {
            return Err(Error::format(
                path,
                format!("line {}: timestamp {t} out of range 0..{frames}", ln + 1),
            ));
        }
        poses[t] = Some(EgoPose::new(
            parse_field(path, fields[1], "theta")?,
            parse_field(path, fields[2], "tx")?,
            parse_field(path, fields[3], "ty")?,
        )?);
    }
    poses
        .into_iter()
        .enumerate()
        .map(|(t, p)| {
            p.ok_or_else(|| Error::format(path, format!("missing pose for timestamp {t}")))
        })
        .collect()
}
