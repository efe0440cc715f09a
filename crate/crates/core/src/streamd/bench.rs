use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dripcount::{CounterConfig, StreamMonitor};
use crate::dropnet::DropNet;
use crate::error::{Error, Result};
use crate::frame::{FrameTensor, RgbFrame};
use crate::synthdrip::{gen_stream, DripStreamSpec, PeriodSchedule, SceneVariety, DEFAULT_POST_ROLL};

use super::preprocess::preprocess;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub batch_sizes: Vec<usize>,
    /// Frames pushed through at each batch size.
    pub frames: usize,
    /// Timed repetitions per batch size; the fastest one is reported.
    pub repetitions: usize,
    /// Raw camera frame size before preprocessing.
    pub raw_width: usize,
    pub raw_height: usize,
    pub stream_fps: f64,
    pub margin: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![1, 2, 4, 8],
            frames: 64,
            repetitions: 3,
            raw_width: 640,
            raw_height: 480,
            stream_fps: 30.0,
            margin: 0.875,
            seed: 0,
        }
    }
}

/// Seconds spent in each stage over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageLatency {
    pub preprocess: f64,
    pub infer: f64,
    pub decode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub frames_processed: u64,
    pub wall_seconds: f64,
    pub fps_achieved: f64,
    pub batch_size: usize,
    /// Streams feeding each batch (one frame each).
    pub streams: usize,
    pub stages: StageLatency,
    pub max_streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub input_size: usize,
    pub stream_fps: f64,
    pub margin: f64,
    pub reports: Vec<ThroughputReport>,
}

/// `⌊fps·margin / stream_fps⌋`.
pub fn max_streams(fps_achieved: f64, stream_fps: f64, margin: f64) -> usize {
    if !(stream_fps > 0.0) || !(fps_achieved * margin >= 0.0) {
        return 0;
    }
    (fps_achieved * margin / stream_fps).floor() as usize
}

fn raw_frames(cfg: &BenchConfig, count: usize) -> Result<Vec<RgbFrame>> {
    use rand::SeedableRng;
    let side = cfg.raw_width.min(cfg.raw_height);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let scene = SceneVariety::default().draw(side, (side as f64 / 2.0, side as f64 / 2.0), &mut rng);
    let stream = gen_stream(&DripStreamSpec {
        duration: count as f64 / cfg.stream_fps,
        fps: cfg.stream_fps,
        period: PeriodSchedule::constant(1.5),
        forming_fraction: 0.5,
        scene,
        post_roll: DEFAULT_POST_ROLL,
    })?;
    let (x0, y0) = ((cfg.raw_width - side) / 2, (cfg.raw_height - side) / 2);
    (0..count)
        .map(|k| {
            let sq = stream.render(k % stream.len())?.to_rgb();
            let mut data = vec![0u8; cfg.raw_width * cfg.raw_height * 3];
            for y in 0..side {
                let dst = ((y0 + y) * cfg.raw_width + x0) * 3;
                data[dst..dst + side * 3].copy_from_slice(&sq.data[y * side * 3..(y + 1) * side * 3]);
            }
            RgbFrame::new(cfg.raw_width, cfg.raw_height, data)
        })
        .collect()
}

/// Pushes pre-rendered raw frames through preprocess, inference and decode
/// at every batch size, one stream per batch slot.
pub fn bench(net: &DropNet, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.batch_sizes.is_empty() || cfg.batch_sizes.contains(&0) || cfg.frames == 0 || cfg.repetitions == 0 {
        return Err(Error::Config("bench needs nonzero batch sizes, frames and repetitions".into()));
    }
    if cfg.raw_width == 0 || cfg.raw_height == 0 {
        return Err(Error::Config("raw frame size must be nonzero".into()));
    }
    let raw = raw_frames(cfg, cfg.frames)?;
    let mut reports = Vec::new();
    for &bs in &cfg.batch_sizes {
        let mut best: Option<ThroughputReport> = None;
        for _ in 0..cfg.repetitions {
            let mut monitors = (0..bs)
                .map(|_| StreamMonitor::new(CounterConfig::default()))
                .collect::<Result<Vec<_>>>()?;
            let mut stages = StageLatency::default();
            let start = Instant::now();
            for (b, chunk) in raw.chunks(bs).enumerate() {
                let t0 = Instant::now();
                let frames = chunk
                    .iter()
                    .map(|f| preprocess(f, net.input_size()))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&FrameTensor> = frames.iter().collect();
                let x = FrameTensor::stack(&refs)?;
                let t1 = Instant::now();
                let grids = net.forward(&x)?;
                let t2 = Instant::now();
                for (m, g) in monitors.iter_mut().zip(&grids) {
                    m.push(g, b as f64 / cfg.stream_fps)?;
                }
                let t3 = Instant::now();
                stages.preprocess += (t1 - t0).as_secs_f64();
                stages.infer += (t2 - t1).as_secs_f64();
                stages.decode += (t3 - t2).as_secs_f64();
            }
            let wall = start.elapsed().as_secs_f64();
            let fps = raw.len() as f64 / wall;
            let report = ThroughputReport {
                frames_processed: raw.len() as u64,
                wall_seconds: wall,
                fps_achieved: fps,
                batch_size: bs,
                streams: bs,
                stages,
                max_streams: max_streams(fps, cfg.stream_fps, cfg.margin),
            };
            log::info!("batch {bs}: {fps:.1} frames/s");
            if best.as_ref().is_none_or(|b| wall < b.wall_seconds) {
                best = Some(report);
            }
        }
        reports.push(best.expect("at least one repetition"));
    }
    Ok(BenchReport {
        input_size: net.input_size(),
        stream_fps: cfg.stream_fps,
        margin: cfg.margin,
        reports,
    })
}
