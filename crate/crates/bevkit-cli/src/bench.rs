//! Wall-clock benchmarks of the core kernels with built-in determinism
//! checks: every repetition's output is checksummed and the run aborts if
//! any repetition disagrees.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bevkit::future::{flow_warp, FlowField};
use bevkit::geometry::{pillar_pool, LiftedCloud};
use bevkit::grid::{grid_sample, BEVGrid, GridSpec};
use bevkit::temporal::{align, EgoPose};

use crate::manifest::Checksum;

/// Timings and the output checksum of one benchmarked op at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub op: String,
    pub size: usize,
    pub reps: usize,
    pub median_us: f64,
    pub p95_us: f64,
    pub checksum: u64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

fn time_op(
    op: &str,
    size: usize,
    reps: usize,
    mut run: impl FnMut() -> u64,
) -> Result<BenchResult> {
    let mut times = Vec::with_capacity(reps);
    let mut checksum = None;
    for rep in 0..reps {
        let start = Instant::now();
        let digest = run();
        times.push(start.elapsed().as_secs_f64() * 1e6);
        match checksum {
            None => checksum = Some(digest),
            Some(expected) => {
                if digest != expected {
                    bail!("{op} (size {size}) produced a different output on repetition {rep}");
                }
            }
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    Ok(BenchResult {
        op: op.to_string(),
        size,
        reps,
        median_us: percentile(&times, 0.5),
        p95_us: percentile(&times, 0.95),
        checksum: checksum.expect("at least one repetition"),
    })
}

fn grid_digest(grid: &BEVGrid) -> u64 {
    let mut c = Checksum::new();
    c.update_f32s(grid.data());
    c.finish()
}

/// Benchmark pillar pooling, alignment, flow warping, and grid sampling at
/// each grid side length in `sizes`.
pub fn run_bench(sizes: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchResult>> {
    if reps == 0 {
        bail!("bench needs at least one repetition");
    }
    let mut results = Vec::new();
    for &size in sizes {
        if size < 4 {
            bail!("bench grid side must be at least 4, got {size}");
        }
        let spec = GridSpec::new(0.0, size as f64, 0.0, size as f64, 1.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ size as u64);
        let channels = 8usize;

        // pillar_pool over four points per cell.
        let point_count = size * size * 4;
        let cloud = LiftedCloud {
            positions: (0..point_count)
                .map(|_| {
                    [
                        rng.random_range(-1.0..size as f64 + 1.0),
                        rng.random_range(-1.0..size as f64 + 1.0),
                        rng.random_range(-4.0..2.0),
                    ]
                })
                .collect(),
            weights: vec![1.0; point_count],
            channels,
            features: (0..point_count * channels)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        };
        results.push(time_op("pillar_pool", size, reps, || {
            grid_digest(&pillar_pool(&cloud, spec))
        })?);

        let field = BEVGrid::from_fn(spec, channels, |x, y, c| {
            ((x * 0.37 + y * 0.11 + c as f64).sin()) as f32
        });

        let motion = EgoPose::new(0.31, 1.25, -0.75).expect("valid pose");
        results.push(time_op("align", size, reps, || {
            grid_digest(&align(&field, &motion))
        })?);

        let flow = FlowField::constant(spec.ny(), spec.nx(), 0.7, -0.3);
        results.push(time_op("flow_warp", size, reps, || {
            grid_digest(&flow_warp(&field, &flow).expect("matching dims"))
        })?);

        let dst = GridSpec::new(0.0, size as f64, 0.0, size as f64, 0.5)?;
        results.push(time_op("grid_sample", size, reps, || {
            grid_digest(&grid_sample(&field, dst))
        })?);
    }
    Ok(results)
}

/// Timing table; checksums make determinism verifiable across runs.
pub fn format_report(results: &[BenchResult]) -> String {
    let mut out = String::from("op size reps median_us p95_us checksum\n");
    for r in results {
        let _ = writeln!(
            out,
            "{} {} {} {:.1} {:.1} {:016x}",
            r.op, r.size, r.reps, r.median_us, r.p95_us, r.checksum
        );
    }
    out
}

/// The checksum column alone, for byte-comparing runs whose timings differ.
pub fn format_checksums(results: &[BenchResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{} {} {:016x}", r.op, r.size, r.checksum);
    }
    out
}
