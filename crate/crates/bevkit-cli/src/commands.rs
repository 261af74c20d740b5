//! Subcommand implementations. Data goes to files, diagnostics to stderr;
//! every run directory gets a manifest sufficient to reproduce it.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use bevkit::eval::InstanceSegFrame;
use bevkit::grid::{read_grid, read_raw_grid, write_grid, RawGrid};
use bevkit::synth::{generate, read_scene, write_scene, Scene};

use crate::bench::{format_checksums, format_report, run_bench};
use crate::config::RunConfig;
use crate::manifest::{fnv1a64, write_run_manifest, write_text_atomic};
use crate::pipeline::{
    evaluate_predictions, run_pipeline_with_grids, thread_cap, FeatureGrids, PipelineOutput,
};

/// Generate a scene directory.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<()> {
    let scene = generate(&config.scene).context("generating scene")?;
    write_scene(&scene, out).context("writing scene directory")?;

    // Fold the run provenance into the scene's manifest so the directory
    // keeps a single metadata file.
    let manifest_path = out.join("manifest.txt");
    let mut manifest = fs::read_to_string(&manifest_path)?;
    manifest.push_str("command=synth\n");
    manifest.push_str(&format!(
        "config_hash={:016x}\n",
        fnv1a64(config.source_text.as_bytes())
    ));
    manifest.push_str(&format!("tool_version={}\n", env!("CARGO_PKG_VERSION")));
    write_text_atomic(&manifest_path, &manifest)?;

    let boxes: usize = scene.boxes.iter().map(Vec::len).sum();
    eprintln!(
        "scene: {} timestamps ({} past + {} future), {} agents, {} box records, {} instance rasters + 1 map raster",
        scene.info.total_frames(),
        scene.info.past_frames,
        scene.info.future_frames,
        scene.boxes[0].len(),
        boxes,
        scene.info.total_frames(),
    );
    Ok(())
}

fn write_metrics(
    out: &Path,
    report: &bevkit::eval::MetricsReport,
    extra_summary: &str,
) -> Result<()> {
    write_text_atomic(&out.join("metrics.csv"), &report.to_csv())?;
    let mut summary = report.to_summary();
    summary.push_str(extra_summary);
    write_text_atomic(&out.join("summary.txt"), &summary)?;
    Ok(())
}

fn write_predictions(out: &Path, scene: &Scene, output: &PipelineOutput) -> Result<()> {
    let pred = out.join("pred");
    fs::create_dir_all(&pred)?;
    let present = scene.info.present_index();
    let mut boxes = String::from("# t id class x y z w l h yaw vx vy score\n");
    for (k, b) in output.predicted_boxes.iter().enumerate() {
        boxes.push_str(&format!(
            "{present} {} {} {} {} {} {} {} {} {} {} {} {}\n",
            k + 1,
            b.class,
            b.x,
            b.y,
            b.z,
            b.width,
            b.length,
            b.height,
            b.yaw,
            b.vx,
            b.vy,
            b.score
        ));
    }
    write_text_atomic(&pred.join("boxes.txt"), &boxes)?;
    for (k, frame) in output.predicted_frames.iter().enumerate() {
        let grid = frame.to_grid(scene.info.motion_spec)?;
        write_grid(&grid, &pred.join(format!("instance_{k:03}.bvg")))?;
    }
    write_grid(&output.predicted_map, &pred.join("map.bvg"))?;
    Ok(())
}

/// Run the pipeline on a scene directory and write metrics (and optionally
/// the stand-in predictions) to `out`. Explicit grid overrides replace the
/// feature-path grids; evaluation stays on the scene's grids.
pub fn cmd_pipeline(
    scene_dir: &Path,
    config: &RunConfig,
    out: &Path,
    save_pred: bool,
    seed: Option<u64>,
    grid_overrides: [Option<bevkit::grid::GridSpec>; 3],
) -> Result<()> {
    let scene = read_scene(scene_dir).context("reading scene")?;
    let seed = seed.unwrap_or(scene.info.seed);
    let threads = thread_cap();
    let mut grids = FeatureGrids::from_scene(&scene);
    if let Some(spec) = grid_overrides[0] {
        grids.base = spec;
    }
    if let Some(spec) = grid_overrides[1] {
        grids.map = spec;
    }
    if let Some(spec) = grid_overrides[2] {
        grids.motion = spec;
    }
    let output = run_pipeline_with_grids(&scene, config, grids, threads, seed)?;

    fs::create_dir_all(out)?;
    let mut shape_lines = String::new();
    for s in &output.stage_shapes {
        shape_lines.push_str(&format!(
            "stage {} {}x{}x{}\n",
            s.stage, s.ny, s.nx, s.channels
        ));
    }
    write_metrics(out, &output.report, &shape_lines)?;
    if save_pred {
        write_predictions(out, &scene, &output)?;
    }
    let shapes = output
        .stage_shapes
        .iter()
        .map(|s| format!("{}:{}x{}", s.stage, s.ny, s.nx))
        .collect::<Vec<_>>()
        .join(",");
    write_run_manifest(
        out,
        "pipeline",
        &config.source_text,
        seed,
        &[
            ("scene", scene_dir.display().to_string()),
            ("stages", shapes),
            ("rollout", config.pipeline.rollout.as_str().to_string()),
        ],
    )?;
    eprintln!(
        "pipeline: {} stages, vpq(full) = {:?}, nds = {:?}",
        output.stage_shapes.len(),
        output.report.get("vpq", "full", None),
        output.report.get("nds", "all", None),
    );
    Ok(())
}

/// Evaluate a prediction directory (layout written by `pipeline
/// --save-pred`) against a scene's ground truth.
pub fn cmd_eval(scene_dir: &Path, pred_dir: &Path, out: &Path) -> Result<()> {
    let scene = read_scene(scene_dir).context("reading scene")?;
    let horizon = scene.info.future_frames;

    let boxes_path = pred_dir.join("boxes.txt");
    let all_boxes = bevkit::synth::read_boxes(&boxes_path, scene.info.total_frames())
        .context("reading predicted boxes")?;
    let predicted_boxes: Vec<_> = all_boxes[scene.info.present_index()]
        .iter()
        .map(|t| t.bev_box.clone())
        .collect();

    let mut predicted_frames = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let path = pred_dir.join(format!("instance_{k:03}.bvg"));
        let grid = read_grid(&path, scene.info.motion_spec)
            .with_context(|| format!("reading predicted raster {}", path.display()))?;
        predicted_frames.push(InstanceSegFrame::from_grid(&grid)?);
    }
    let predicted_map = read_grid(&pred_dir.join("map.bvg"), scene.info.map_spec)
        .context("reading predicted map")?;

    let report = evaluate_predictions(&scene, &predicted_boxes, &predicted_frames, &predicted_map)?;
    fs::create_dir_all(out)?;
    write_metrics(out, &report, "")?;
    write_run_manifest(
        out,
        "eval",
        "",
        scene.info.seed,
        &[
            ("scene", scene_dir.display().to_string()),
            ("pred", pred_dir.display().to_string()),
        ],
    )?;
    eprintln!("eval: vpq(full) = {:?}", report.get("vpq", "full", None));
    Ok(())
}

/// Time the core kernels and write the report.
pub fn cmd_bench(config: &RunConfig, out: &Path, seed: u64) -> Result<()> {
    let results = run_bench(&config.bench.sizes, config.bench.reps, seed)?;
    fs::create_dir_all(out)?;
    write_text_atomic(&out.join("bench_report.txt"), &format_report(&results))?;
    write_text_atomic(
        &out.join("bench_checksums.txt"),
        &format_checksums(&results),
    )?;
    write_run_manifest(
        out,
        "bench",
        &config.source_text,
        seed,
        &[(
            "sizes",
            config
                .bench
                .sizes
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )],
    )?;
    eprintln!("bench: {} measurements written", results.len());
    Ok(())
}

/// Dump a grid file as text or a binary portable graymap.
pub fn cmd_dump(input: &Path, format: &str, channel: usize, out: Option<&Path>) -> Result<()> {
    let raw = read_raw_grid(input)?;
    if channel >= raw.channels as usize {
        bail!("channel {channel} out of range: grid has {}", raw.channels);
    }
    match format {
        "text" => {
            let text = dump_text(&raw, channel);
            match out {
                Some(path) => write_text_atomic(path, &text)?,
                None => write_stdout(text.as_bytes())?,
            }
        }
        "pgm" => {
            let bytes = dump_pgm(&raw, channel);
            match out {
                Some(path) => {
                    fs::write(path, &bytes)?;
                }
                None => write_stdout(&bytes)?,
            }
        }
        other => bail!("unknown dump format `{other}` (expected text or pgm)"),
    }
    Ok(())
}

/// Write to stdout, treating a closed pipe (e.g. `| head`) as success.
fn write_stdout(bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().write_all(bytes) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn dump_text(raw: &RawGrid, channel: usize) -> String {
    let mut text = format!(
        "# {}x{}x{} channel {channel}\n",
        raw.ny, raw.nx, raw.channels
    );
    let c = raw.channels as usize;
    for i in 0..raw.ny as usize {
        let row: Vec<String> = (0..raw.nx as usize)
            .map(|j| format!("{}", raw.data[(i * raw.nx as usize + j) * c + channel]))
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    text
}

fn dump_pgm(raw: &RawGrid, channel: usize) -> Vec<u8> {
    let c = raw.channels as usize;
    let values: Vec<f32> = (0..(raw.ny * raw.nx) as usize)
        .map(|k| raw.data[k * c + channel])
        .collect();
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
    let mut bytes = format!("P5\n{} {}\n255\n", raw.nx, raw.ny).into_bytes();
    bytes.extend(values.iter().map(|&v| ((v - min) * scale).round() as u8));
    bytes
}
