use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dripcount::{CounterConfig, MonitorOutput, StreamMonitor};
use crate::dropnet::{DropNet, OutputGrid};
use crate::error::{Error, Result};

use super::source::{Provenance, StreamBatch};

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedOutput {
    pub stream_id: String,
    pub frame_index: u64,
    /// Stream drop count after this frame.
    pub drop_count: u64,
    pub output: MonitorOutput,
}

#[derive(Debug, Clone, PartialEq)]
struct Lane {
    monitor: StreamMonitor,
    last_index: Option<u64>,
    frames: u64,
}

/// Per-stream counter chains keyed by stream id.
#[derive(Debug, Clone, PartialEq)]
pub struct Router {
    lanes: BTreeMap<String, Lane>,
}

impl Router {
    pub fn new<I, S>(stream_ids: I, config: CounterConfig) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lanes = BTreeMap::new();
        for id in stream_ids {
            let id = id.into();
            let lane = Lane {
                monitor: StreamMonitor::new(config)?,
                last_index: None,
                frames: 0,
            };
            if lanes.insert(id.clone(), lane).is_some() {
                return Err(Error::Config(format!("duplicate stream id {id}")));
            }
        }
        Ok(Self { lanes })
    }

    pub fn monitor(&self, stream_id: &str) -> Option<&StreamMonitor> {
        self.lanes.get(stream_id).map(|l| &l.monitor)
    }

    pub fn frames_seen(&self, stream_id: &str) -> u64 {
        self.lanes.get(stream_id).map_or(0, |l| l.frames)
    }

    pub fn stream_ids(&self) -> impl Iterator<Item = &str> {
        self.lanes.keys().map(String::as_str)
    }

    fn check(&self, provenance: &[Provenance]) -> Result<()> {
        let mut last: BTreeMap<&str, Option<u64>> = BTreeMap::new();
        for p in provenance {
            let Some(lane) = self.lanes.get(&p.stream_id) else {
                return Err(Error::Routing(format!("unknown stream {}", p.stream_id)));
            };
            let prev = last.entry(&p.stream_id).or_insert(lane.last_index);
            if prev.is_some_and(|i| p.frame_index <= i) {
                return Err(Error::Routing(format!(
                    "stream {}: frame {} arrives after frame {}",
                    p.stream_id,
                    p.frame_index,
                    prev.unwrap()
                )));
            }
            *prev = Some(p.frame_index);
        }
        Ok(())
    }

    /// Feeds already computed grids, slot by slot. Nothing is applied
    /// unless the whole provenance is consistent.
    pub fn route(&mut self, provenance: &[Provenance], grids: &[OutputGrid]) -> Result<Vec<RoutedOutput>> {
        if provenance.len() != grids.len() {
            return Err(Error::Routing(format!(
                "{} provenance entries for {} grids",
                provenance.len(),
                grids.len()
            )));
        }
        self.check(provenance)?;
        let mut out = Vec::new();
        for (p, g) in provenance.iter().zip(grids) {
            let lane = self.lanes.get_mut(&p.stream_id).expect("checked above");
            let produced = lane.monitor.push(g, p.t)?;
            lane.last_index = Some(p.frame_index);
            lane.frames += 1;
            let drop_count = lane.monitor.drop_count();
            out.extend(produced.into_iter().map(|output| RoutedOutput {
                stream_id: p.stream_id.clone(),
                frame_index: p.frame_index,
                drop_count,
                output,
            }));
        }
        Ok(out)
    }
}

/// One inference call over the whole batch, then per-stream routing.
pub fn infer_and_route(net: &DropNet, batch: &StreamBatch, router: &mut Router) -> Result<Vec<RoutedOutput>> {
    let Some(frames) = &batch.frames else {
        if batch.provenance.is_empty() {
            return Ok(Vec::new());
        }
        return Err(Error::Routing("provenance without frames".into()));
    };
    if frames.batch() != batch.provenance.len() {
        return Err(Error::Routing(format!(
            "{} frames for {} provenance entries",
            frames.batch(),
            batch.provenance.len()
        )));
    }
    router.check(&batch.provenance)?;
    let grids = net.forward(frames)?;
    router.route(&batch.provenance, &grids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Detach,
    Alarm,
}

/// One `events.jsonl` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub stream_id: String,
    pub t: f64,
    pub kind: EventKind,
    pub drop_count: u64,
    pub cell: [usize; 2],
}

pub const EVENTS_FILE: &str = "events.jsonl";
pub const FLOW_FILE: &str = "flow.csv";
pub const FLOW_HEADER: &str = "stream_id,t,q_gtt_min,window_n";

/// Writers for `events.jsonl` and `flow.csv`.
pub struct EventLog {
    events: BufWriter<File>,
    flow: BufWriter<File>,
}

impl EventLog {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let events = BufWriter::new(File::create(dir.join(EVENTS_FILE))?);
        let mut flow = BufWriter::new(File::create(dir.join(FLOW_FILE))?);
        writeln!(flow, "{FLOW_HEADER}")?;
        Ok(Self { events, flow })
    }

    pub fn write(&mut self, routed: &[RoutedOutput]) -> Result<()> {
        for r in routed {
            let (t, kind, cell) = match &r.output {
                MonitorOutput::Detach(e) => (e.t, EventKind::Detach, e.cell),
                MonitorOutput::Alarm(a) => (a.t, EventKind::Alarm, a.cell),
                MonitorOutput::Flow(q) => {
                    writeln!(self.flow, "{},{},{},{}", r.stream_id, q.t, q.q, q.window_n)?;
                    continue;
                }
            };
            let rec = EventRecord {
                stream_id: r.stream_id.clone(),
                t,
                kind,
                drop_count: r.drop_count,
                cell: [cell.0, cell.1],
            };
            serde_json::to_writer(&mut self.events, &rec)?;
            self.events.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.events.flush()?;
        self.flow.flush()?;
        Ok(())
    }
}
