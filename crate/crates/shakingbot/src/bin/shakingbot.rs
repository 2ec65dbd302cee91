//! Batch front-end for the harness. The library (and its examples/) is the
//! primary interface; this binary only wraps it for scripted runs.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use shakingbot::config::Config;
use shakingbot::error::Result;
use shakingbot::harness::{self, Method};
use shakingbot::perception::{score_masks, Camera, Masks};
use shakingbot::snapshot;

#[derive(Parser)]
#[command(name = "shakingbot", about = "Dynamic bagging simulator and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print its JSON record.
    RunTrial {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "shakingbot")]
        method: String,
        #[arg(long, default_value_t = 1)]
        tier: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a full suite and write trials.jsonl, summary.csv, summary.txt.
    RunSuite {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trials per (method, tier) cell.
        #[arg(long, default_value_t = 8)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated method list; defaults to all four.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render a saved state snapshot to depth (PGM) and RGB (PNG) rasters.
    Render {
        /// Plain-text particle snapshot.
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output stem; writes <out>.pgm and <out>.png.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted masks against ground truth from a snapshot.
    EvalSeg {
        /// Directory with handle.png and rim.png prediction masks.
        #[arg(long)]
        pred: PathBuf,
        /// Snapshot whose oracle masks are the ground truth.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RunTrial {
            config,
            method,
            tier,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let method = Method::parse(&method)?;
            let record = harness::run_trial(&cfg, method, tier, seed)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&record)
                    .map_err(|e| shakingbot::Error::Config(e.to_string()))?
            );
        }
        Command::RunSuite {
            config,
            trials,
            seed,
            methods,
            out,
        } => {
            let cfg = load_config(&config)?;
            let methods: Vec<Method> = match methods {
                Some(s) => s
                    .split(',')
                    .map(|m| Method::parse(m.trim()))
                    .collect::<Result<_>>()?,
                None => Method::ALL.to_vec(),
            };
            let records = harness::run_suite(&cfg, &methods, &[1, 2, 3], trials, seed)?;
            harness::write_suite_outputs(&records, &out)?;
            print!("{}", harness::format_table(&records));
        }
        Command::Render { state, config, out } => {
            let cfg = load_config(&config)?;
            let points = snapshot::load_snapshot(&state)?;
            let cam = Camera::from_config(&cfg.perception);
            let (depth, rgb) = snapshot::render_snapshot_points(&points, &cam);
            snapshot::save_depth_pgm(&depth, &out.with_extension("pgm"))?;
            snapshot::save_rgb_png(&rgb, &out.with_extension("png"))?;
            eprintln!(
                "wrote {} and {}",
                out.with_extension("pgm").display(),
                out.with_extension("png").display()
            );
        }
        Command::EvalSeg {
            pred,
            truth,
            config,
        } => {
            let cfg = load_config(&config)?;
            let points = snapshot::load_snapshot(&truth)?;
            // Rebuild a minimal state for oracle masks: the snapshot has no
            // mesh, so splat-render the particles for truth labeling.
            let cam = Camera::from_config(&cfg.perception);
            let truth_masks = snapshot_truth_masks(&points, &cam);
            let handle = snapshot::load_mask_png(&pred.join("handle.png"))?;
            let rim = snapshot::load_mask_png(&pred.join("rim.png"))?;
            let pred_masks = Masks {
                handle,
                rim,
                handle_prob: None,
                rim_prob: None,
            };
            let weights =
                shakingbot::perception::Raster::new(cam.width_px, cam.height_px, 1.0f64);
            let scores = score_masks(&pred_masks, &truth_masks, &weights)?;
            println!(
                "loss {:.6}  miou {:.4}  mpa {:.4}",
                scores.loss, scores.miou, scores.mpa
            );
        }
    }
    Ok(())
}

/// Truth masks from a snapshot via the splat render: topmost particle label
/// per covered pixel.
fn snapshot_truth_masks(points: &snapshot::SnapshotPoints, cam: &Camera) -> Masks {
    use shakingbot::perception::{COLOR_HANDLE, COLOR_RIM};
    let (_, rgb) = snapshot::render_snapshot_points(points, cam);
    let mut masks = Masks::empty(cam.width_px, cam.height_px);
    for y in 0..cam.height_px {
        for x in 0..cam.width_px {
            let c = *rgb.get(x, y);
            if c == COLOR_HANDLE {
                masks.handle.set(x, y, true);
            } else if c == COLOR_RIM {
                masks.rim.set(x, y, true);
            }
        }
    }
    masks
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
