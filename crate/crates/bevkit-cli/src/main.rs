use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use bevkit_cli::commands;
use bevkit_cli::config::{parse_spec_override, RolloutKind, RunConfig};

/// Synthetic BEV perception/prediction harness: generate scenes, run the
/// lift/pool/align/sample/rollout pipeline, evaluate predictions, and
/// benchmark the kernels. Set BEVKIT_THREADS to cap worker parallelism.
#[derive(Parser)]
#[command(name = "bevkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (sectioned key = value text).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scene seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Detection grid override: x_min,x_max,y_min,y_max,cell_size.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    det_spec: Option<String>,
    /// Map grid override: x_min,x_max,y_min,y_max,cell_size.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    map_spec: Option<String>,
    /// Motion grid override: x_min,x_max,y_min,y_max,cell_size.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    motion_spec: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.scene.seed = seed;
        }
        if let Some(spec) = &self.det_spec {
            config.scene.detection_spec = parse_spec_override(spec)?;
        }
        if let Some(spec) = &self.map_spec {
            config.scene.map_spec = parse_spec_override(spec)?;
        }
        if let Some(spec) = &self.motion_spec {
            config.scene.motion_spec = parse_spec_override(spec)?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene directory.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output scene directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline on a scene and write metrics.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        /// Input scene directory.
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for metrics and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Flow generator for the rollout stage.
        #[arg(long, value_name = "gt-flow|zero-flow")]
        rollout: Option<String>,
        /// Gaussian noise applied to the detection stand-in.
        #[arg(long)]
        det_noise: Option<f64>,
        /// Foreground drop probability for the map stand-in.
        #[arg(long)]
        map_noise: Option<f64>,
        /// Also write the stand-in predictions under out/pred.
        #[arg(long)]
        save_pred: bool,
    },
    /// Evaluate a prediction directory against a scene.
    Eval {
        /// Ground-truth scene directory.
        #[arg(long)]
        scene: PathBuf,
        /// Prediction directory (the pipeline's --save-pred layout).
        #[arg(long)]
        pred: PathBuf,
        /// Output directory for metrics.
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark the core kernels.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated grid side lengths.
        #[arg(long)]
        sizes: Option<String>,
        /// Repetitions per op and size.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Dump a grid file for inspection.
    Dump {
        /// Grid file to read.
        #[arg(long)]
        input: PathBuf,
        /// Output format.
        #[arg(long, default_value = "text", value_name = "text|pgm")]
        format: String,
        /// Channel to dump.
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => {
            let config = config.load()?;
            commands::cmd_synth(&config, &out)
        }
        Command::Pipeline {
            config,
            scene,
            out,
            rollout,
            det_noise,
            map_noise,
            save_pred,
        } => {
            let seed = config.seed;
            let grid_overrides = [
                config
                    .det_spec
                    .as_deref()
                    .map(parse_spec_override)
                    .transpose()?,
                config
                    .map_spec
                    .as_deref()
                    .map(parse_spec_override)
                    .transpose()?,
                config
                    .motion_spec
                    .as_deref()
                    .map(parse_spec_override)
                    .transpose()?,
            ];
            let mut config = config.load()?;
            if let Some(kind) = rollout {
                config.pipeline.rollout = RolloutKind::parse(&kind)?;
            }
            if let Some(noise) = det_noise {
                config.pipeline.detection_noise = noise;
            }
            if let Some(noise) = map_noise {
                config.pipeline.map_noise = noise;
            }
            commands::cmd_pipeline(&scene, &config, &out, save_pred, seed, grid_overrides)
        }
        Command::Eval { scene, pred, out } => commands::cmd_eval(&scene, &pred, &out),
        Command::Bench {
            config,
            out,
            sizes,
            reps,
        } => {
            let mut loaded = config.load()?;
            if let Some(sizes) = sizes {
                loaded.bench.sizes = sizes
                    .split(',')
                    .map(|v| v.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()?;
            }
            if let Some(reps) = reps {
                loaded.bench.reps = reps;
            }
            let seed = config.seed.unwrap_or(loaded.scene.seed);
            commands::cmd_bench(&loaded, &out, seed)
        }
        Command::Dump {
            input,
            format,
            channel,
            out,
        } => commands::cmd_dump(&input, &format, channel, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
