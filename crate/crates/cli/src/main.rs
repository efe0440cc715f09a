//! `dripmon`: dataset and stream generation, training, evaluation, the
//! multi-stream pipeline, throughput bench and heat maps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dripvision::dropnet::{load_weights, save_weights, DropNet, NetConfig};
use dripvision::frame::RgbFrame;
use dripvision::streamd::{
    bench, emit_heatmap, preprocess, run_pipeline, write_drpv, write_json, BenchConfig, DrpvHeader, PipelineConfig,
};
use dripvision::synthdrip::{
    build_dataset, gen_stream, write_dataset, DatasetSpec, DiskDataset, DripStreamSpec, PeriodSchedule, SceneVariety,
    SynthDataset, DEFAULT_POST_ROLL,
};
use dripvision::trainer::{evaluate, train, write_history, TrainConfig};
use dripvision::{Error, Exec};

#[derive(Parser)]
#[command(name = "dripmon", version, about = "Camera-based IV drip monitoring")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON settings for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Render a labeled synthetic dataset (PPM frames + manifest.jsonl).
    GenDataset {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Draw scenes from the held-out background styles.
        #[arg(long)]
        held_out: bool,
    },
    /// Render an oracle drip stream (stream.drpv, truth.jsonl, detach.jsonl).
    GenStream {
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 30)]
        fps: u32,
        /// Seconds between drops.
        #[arg(long, default_value_t = 2.0)]
        period: f64,
        /// Switch to this period at `--step-at`.
        #[arg(long, requires = "step_at")]
        step_to: Option<f64>,
        #[arg(long)]
        step_at: Option<f64>,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        held_out: bool,
    },
    /// Train a network; writes weights.drpw and history.csv.
    Train {
        /// Dataset directory from gen-dataset; rendered in memory if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Use the full-size reference network instead of the desk one.
        #[arg(long)]
        reference: bool,
    },
    /// Report state and cell accuracy of a weight file on a dataset.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long)]
        held_out: bool,
    },
    /// Run the multi-stream pipeline described by --config.
    Run,
    /// Measure throughput at batch sizes 1, 2, 4 and 8.
    Bench {
        #[arg(long)]
        weights: PathBuf,
    },
    /// Write the two state-layer heat maps of one frame as PGM images.
    Heatmap {
        #[arg(long)]
        weights: PathBuf,
        /// A PPM frame.
        #[arg(long)]
        frame: PathBuf,
    },
}

/// Exit 1: bad arguments or configuration. Exit 2: failure while running.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Param(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config(_) | Error::Param(_)) => Failure::Usage(e),
            _ => Failure::Runtime(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn out_dir(common: &Common) -> CliResult<PathBuf> {
    let dir = common.out.clone().ok_or_else(|| usage("--out is required"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn exec(common: &Common) -> Exec {
    if common.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn load_net(path: &Path, common: &Common) -> CliResult<DropNet> {
    let mut net = load_weights(path).map_err(|e| usage(format!("weights {}: {e}", path.display())))?;
    net.set_exec(exec(common));
    Ok(net)
}

fn dispatch(cli: Cli) -> CliResult {
    let common = &cli.common;
    match cli.command {
        Command::GenDataset {
            count,
            size,
            grid,
            held_out,
        } => {
            let mut spec = match &common.config {
                Some(p) => read_config(p)?,
                None => DatasetSpec::new(count, size, grid, 0),
            };
            if held_out {
                spec.variety = SceneVariety::held_out();
            }
            if let Some(seed) = common.seed {
                spec.seed = seed;
            }
            let manifest = build_dataset(&spec)?;
            let dir = out_dir(common)?;
            write_dataset(&dir, &manifest, exec(common))?;
            log::info!("wrote {} samples to {}", manifest.records.len(), dir.display());
        }
        Command::GenStream {
            duration,
            fps,
            period,
            step_to,
            step_at,
            size,
            held_out,
        } => {
            let spec: DripStreamSpec = match &common.config {
                Some(p) => read_config(p)?,
                None => {
                    let variety = if held_out { SceneVariety::held_out() } else { SceneVariety::default() };
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(common.seed.unwrap_or(0));
                    let c = size as f64 / 2.0;
                    DripStreamSpec {
                        duration,
                        fps: fps as f64,
                        period: match (step_to, step_at) {
                            (Some(after), Some(at)) => PeriodSchedule::step(period, after, at),
                            _ => PeriodSchedule::constant(period),
                        },
                        forming_fraction: 0.5,
                        scene: variety.draw(size, (c, c), &mut rng),
                        post_roll: DEFAULT_POST_ROLL,
                    }
                }
            };
            if spec.fps.fract() != 0.0 || spec.fps > u32::MAX as f64 {
                return Err(usage("stream fps must be a whole number for the DRPV header"));
            }
            let stream = gen_stream(&spec)?;
            let dir = out_dir(common)?;
            let frames = (0..stream.len())
                .map(|k| stream.render(k).map(|f| f.to_rgb()))
                .collect::<Result<Vec<RgbFrame>, _>>()?;
            let header = DrpvHeader {
                width: spec.scene.size as u32,
                height: spec.scene.size as u32,
                fps_num: spec.fps as u32,
                fps_den: 1,
                frame_count: frames.len() as u64,
            };
            write_drpv(dir.join("stream.drpv"), &header, &frames)?;
            stream.write_truth(&dir)?;
            write_json(dir.join("stream.json"), &spec)?;
            log::info!(
                "wrote {} frames, {} detaches to {}",
                frames.len(),
                stream.detach_times.len(),
                dir.display()
            );
        }
        Command::Train {
            data,
            epochs,
            reference,
        } => {
            let mut file: TrainFile = match &common.config {
                Some(p) => read_config(p)?,
                None => TrainFile::default(),
            };
            if reference {
                file.net = NetConfig::reference();
            }
            if let Some(seed) = common.seed {
                file.net.seed = seed;
                file.train.seed = seed;
                file.dataset.seed = seed;
            }
            if let Some(e) = epochs {
                file.train.epochs = e;
            }
            file.dataset.size = file.net.input_size;
            file.dataset.grid = file.net.grid_size;
            let mut net = DropNet::build(file.net.clone())?;
            net.set_exec(exec(common));
            let dir = out_dir(common)?;
            let (net, history) = match &data {
                Some(d) => train(net, &DiskDataset::open(d)?, &file.train)?,
                None => train(net, &SynthDataset::new(&file.dataset)?, &file.train)?,
            };
            save_weights(&net, dir.join("weights.drpw"))?;
            write_history(dir.join("history.csv"), &history)?;
            let last = history.epochs.last().expect("at least one epoch");
            println!(
                "best epoch {} of {}: val loss {:.4}, val state acc {:.4}",
                history.best_epoch,
                history.epochs.len(),
                history.epochs[history.best_epoch - 1].val_loss,
                last.val_state_acc
            );
        }
        Command::Eval {
            weights,
            data,
            count,
            held_out,
        } => {
            let net = load_net(&weights, common)?;
            let metrics = match &data {
                Some(d) => evaluate(&net, &DiskDataset::open(d)?)?,
                None => {
                    let mut spec = match &common.config {
                        Some(p) => read_config(p)?,
                        None => DatasetSpec::new(count, net.input_size(), net.grid_size(), 0),
                    };
                    if held_out {
                        spec.variety = SceneVariety::held_out();
                    }
                    if let Some(seed) = common.seed {
                        spec.seed = seed;
                    }
                    evaluate(&net, &SynthDataset::new(&spec)?)?
                }
            };
            println!("{}", serde_json::to_string_pretty(&metrics).context("encoding metrics")?);
            if common.out.is_some() {
                write_json(out_dir(common)?.join("metrics.json"), &metrics)?;
            }
        }
        Command::Run => {
            let path = common.config.as_ref().ok_or_else(|| usage("run needs --config"))?;
            let mut cfg = PipelineConfig::load(path)?;
            if let Some(out) = &common.out {
                cfg.output.dir = out.clone();
            }
            if common.sequential {
                cfg.model.exec = Some(Exec::Sequential);
            }
            let report = run_pipeline(&cfg)?;
            for s in &report.streams {
                println!("{}: {} frames, {} drops", s.stream_id, s.frames, s.drop_count);
            }
        }
        Command::Bench { weights } => {
            let net = load_net(&weights, common)?;
            let mut cfg: BenchConfig = match &common.config {
                Some(p) => read_config(p)?,
                None => BenchConfig::default(),
            };
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let report = bench(&net, &cfg)?;
            for r in &report.reports {
                println!(
                    "batch {}: {:.1} frames/s, max {} streams at {} fps",
                    r.batch_size, r.fps_achieved, r.max_streams, cfg.stream_fps
                );
            }
            if common.out.is_some() {
                write_json(out_dir(common)?.join("report.json"), &report)?;
            }
        }
        Command::Heatmap { weights, frame } => {
            if common.config.is_some() {
                return Err(usage("heatmap takes no --config"));
            }
            let net = load_net(&weights, common)?;
            let raw = RgbFrame::read_ppm(&frame).with_context(|| format!("reading {}", frame.display()))?;
            let x = dripvision::frame::FrameTensor::stack(&[&preprocess(&raw, net.input_size())?])?;
            let grid = net.forward(&x)?.remove(0);
            let stem = frame.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
            let paths = emit_heatmap(&grid, out_dir(common)?, stem)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// `train --config` contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    net: NetConfig,
    train: TrainConfig,
    /// Used when no `--data` directory is given.
    dataset: DatasetSpec,
}

impl Default for TrainFile {
    fn default() -> Self {
        let net = NetConfig::desk();
        Self {
            dataset: DatasetSpec::new(2000, net.input_size, net.grid_size, 0),
            net,
            train: TrainConfig::default(),
        }
    }
}
