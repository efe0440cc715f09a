use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dripcount::{CounterConfig, MonitorOutput};
use crate::dropnet::{load_weights, DropNet};
use crate::error::{Error, Result};
use crate::exec::Exec;

use super::route::{infer_and_route, EventLog, Router};
use super::source::{collect_batch, open_source, LiveStream, StreamSource, Transport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub weights: PathBuf,
    #[serde(default)]
    pub exec: Option<Exec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    pub frames_per_stream: usize,
    pub timeout_ms: u64,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            frames_per_stream: 1,
            timeout_ms: 1000,
        }
    }
}

/// The `run` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSection,
    pub streams: Vec<StreamSource>,
    #[serde(default)]
    pub counter: CounterConfig,
    pub output: OutputSection,
    #[serde(default)]
    pub batch: BatchSection,
}

impl PipelineConfig {
    /// Parses a config file; relative paths are taken from its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.model.weights);
        fix(&mut self.output.dir);
        for s in &mut self.streams {
            match &mut s.transport {
                Transport::PpmDir { path } | Transport::Container { path } => fix(path),
                Transport::Stdin { .. } => {}
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.streams.is_empty() {
            return Err(Error::Config("no streams configured".into()));
        }
        let stdin = self
            .streams
            .iter()
            .filter(|s| matches!(s.transport, Transport::Stdin { .. }))
            .count();
        if stdin > 1 {
            return Err(Error::Config("at most one stream can read standard input".into()));
        }
        if self.batch.frames_per_stream == 0 {
            return Err(Error::Config("frames_per_stream must be at least 1".into()));
        }
        self.counter.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub stream_id: String,
    pub frames: u64,
    pub drop_count: u64,
    pub detach_times: Vec<f64>,
    pub flow_samples: usize,
    pub last_q: Option<f64>,
    pub alarms: usize,
    pub error: Option<String>,
}

/// `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub streams: Vec<StreamSummary>,
    pub frames_processed: u64,
    pub batches: u64,
    pub wall_seconds: f64,
    pub fps_achieved: f64,
}

pub const REPORT_FILE: &str = "report.json";

/// Loads the network, opens every source, then drains them all into the
/// output directory. Nothing is written if the model or a source fails to
/// open.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut net = load_weights(&cfg.model.weights)
        .map_err(|e| Error::Config(format!("weights {}: {e}", cfg.model.weights.display())))?;
    if let Some(exec) = cfg.model.exec {
        net.set_exec(exec);
    }
    let start = Instant::now();
    let mut streams = Vec::with_capacity(cfg.streams.len());
    for src in &cfg.streams {
        let (reader, clock) = open_source(src, start).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(format!("stream {}: {other}", src.stream_id)),
        })?;
        streams.push((src.stream_id.clone(), reader, clock));
    }
    let router = Router::new(cfg.streams.iter().map(|s| s.stream_id.clone()), cfg.counter)?;
    let live = streams
        .into_iter()
        .map(|(id, reader, clock)| LiveStream::spawn(id, reader, clock, net.input_size()))
        .collect();
    run_live(&net, live, router, cfg.batch, &cfg.output.dir)
}

/// The batching loop over already running streams.
pub fn run_live(
    net: &DropNet,
    mut streams: Vec<LiveStream>,
    mut router: Router,
    batch: BatchSection,
    out_dir: &Path,
) -> Result<PipelineReport> {
    let mut log = EventLog::create(out_dir)?;
    let timeout = Duration::from_millis(batch.timeout_ms);
    let start = Instant::now();
    let (mut frames, mut batches) = (0u64, 0u64);
    let mut summaries: Vec<StreamSummary> = router
        .stream_ids()
        .map(|id| StreamSummary {
            stream_id: id.to_string(),
            frames: 0,
            drop_count: 0,
            detach_times: Vec::new(),
            flow_samples: 0,
            last_q: None,
            alarms: 0,
            error: None,
        })
        .collect();
    while streams.iter().any(|s| !s.is_done()) {
        let b = collect_batch(&mut streams, batch.frames_per_stream, timeout)?;
        if b.is_empty() {
            continue;
        }
        let routed = infer_and_route(net, &b, &mut router)?;
        log.write(&routed)?;
        frames += b.len() as u64;
        batches += 1;
        for r in &routed {
            let s = summaries.iter_mut().find(|s| s.stream_id == r.stream_id).expect("routed to a known stream");
            match &r.output {
                MonitorOutput::Flow(q) => {
                    s.flow_samples += 1;
                    s.last_q = Some(q.q);
                }
                MonitorOutput::Alarm(_) => s.alarms += 1,
                MonitorOutput::Detach(_) => {}
            }
        }
    }
    log.flush()?;
    let wall = start.elapsed().as_secs_f64();
    for s in &mut summaries {
        let m = router.monitor(&s.stream_id).expect("summary per lane");
        s.frames = router.frames_seen(&s.stream_id);
        s.drop_count = m.drop_count();
        s.detach_times = m.counter.detach_times.clone();
        s.error = streams
            .iter()
            .find(|l| l.stream_id == s.stream_id)
            .and_then(|l| l.failure.clone());
    }
    let report = PipelineReport {
        streams: summaries,
        frames_processed: frames,
        batches,
        wall_seconds: wall,
        fps_achieved: if wall > 0.0 { frames as f64 / wall } else { 0.0 },
    };
    write_json(out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
