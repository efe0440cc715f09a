use std::fs;
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameTensor, RgbFrame};
use crate::tensor_nn::Tensor4;

use super::container::DrpvReader;
use super::preprocess::preprocess;

/// Where a stream's frames come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transport {
    /// `*.ppm` files in lexicographic order.
    PpmDir { path: PathBuf },
    /// A DRPV container.
    Container { path: PathBuf },
    /// Raw RGB24 frames of a fixed size on standard input.
    Stdin { width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSource {
    pub stream_id: String,
    /// Required except for containers, which carry their own rate.
    #[serde(default)]
    pub fps: Option<f64>,
    #[serde(flatten)]
    pub transport: Transport,
}

/// A frame after preprocessing, with its position in its stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedFrame {
    pub frame_index: u64,
    pub t: f64,
    pub frame: FrameTensor,
}

pub trait FrameReader: Send {
    fn next_frame(&mut self) -> Result<Option<RgbFrame>>;
}

pub struct PpmDirReader {
    files: Vec<PathBuf>,
    pos: usize,
}

impl PpmDirReader {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "ppm"));
        files.sort();
        Ok(Self { files, pos: 0 })
    }
}

impl FrameReader for PpmDirReader {
    fn next_frame(&mut self) -> Result<Option<RgbFrame>> {
        let Some(path) = self.files.get(self.pos) else {
            return Ok(None);
        };
        self.pos += 1;
        RgbFrame::read_ppm(path).map(Some)
    }
}

impl<R: Read + Send> FrameReader for DrpvReader<R> {
    fn next_frame(&mut self) -> Result<Option<RgbFrame>> {
        DrpvReader::next_frame(self)
    }
}

/// Back-to-back raw RGB24 frames. A partial frame before EOF is an error.
pub struct RawPipeReader<R> {
    inner: R,
    width: usize,
    height: usize,
}

impl<R: Read + Send> RawPipeReader<R> {
    pub fn new(inner: R, width: usize, height: usize) -> Self {
        Self { inner, width, height }
    }
}

impl<R: Read + Send> FrameReader for RawPipeReader<R> {
    fn next_frame(&mut self) -> Result<Option<RgbFrame>> {
        let mut data = vec![0u8; self.width * self.height * 3];
        let mut filled = 0;
        while filled < data.len() {
            match self.inner.read(&mut data[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        match filled {
            0 => Ok(None),
            n if n < data.len() => Err(Error::Format(format!("pipe ended inside a frame ({n} of {} bytes)", data.len()))),
            _ => RgbFrame::new(self.width, self.height, data).map(Some),
        }
    }
}

/// How frame timestamps are assigned.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    /// `frame_index / fps`.
    Nominal(f64),
    /// Seconds since the given instant, on arrival.
    Arrival(Instant),
}

/// Opens the reader for a source and resolves its timestamp clock.
pub fn open_source(src: &StreamSource, start: Instant) -> Result<(Box<dyn FrameReader>, Clock)> {
    let need_fps = || match src.fps {
        Some(f) if f > 0.0 && f.is_finite() => Ok(f),
        Some(f) => Err(Error::Config(format!("stream {}: fps must be positive, got {f}", src.stream_id))),
        None => Err(Error::Config(format!("stream {}: fps is required", src.stream_id))),
    };
    Ok(match &src.transport {
        Transport::PpmDir { path } => (Box::new(PpmDirReader::open(path)?), Clock::Nominal(need_fps()?)),
        Transport::Container { path } => {
            let r = DrpvReader::open(path)?;
            let fps = match src.fps {
                Some(_) => need_fps()?,
                None => r.header.fps(),
            };
            (Box::new(r), Clock::Nominal(fps))
        }
        Transport::Stdin { width, height } => {
            if *width == 0 || *height == 0 {
                return Err(Error::Config(format!("stream {}: zero frame size", src.stream_id)));
            }
            need_fps()?;
            (
                Box::new(RawPipeReader::new(std::io::stdin(), *width, *height)),
                Clock::Arrival(start),
            )
        }
    })
}

type FrameMsg = Result<TimedFrame>;

/// A stream being consumed: frames arrive over a bounded channel from a
/// producer (a reader thread, or any in-process sender).
pub struct LiveStream {
    pub stream_id: String,
    rx: Receiver<FrameMsg>,
    done: bool,
    /// Set when the producer reported an error; the stream is dropped.
    pub failure: Option<String>,
    handle: Option<JoinHandle<()>>,
}

pub const CHANNEL_DEPTH: usize = 64;

impl LiveStream {
    pub fn from_channel(stream_id: impl Into<String>, rx: Receiver<FrameMsg>) -> Self {
        Self {
            stream_id: stream_id.into(),
            rx,
            done: false,
            failure: None,
            handle: None,
        }
    }

    /// An in-process producer: the returned sender feeds the stream.
    pub fn channel(stream_id: impl Into<String>) -> (SyncSender<FrameMsg>, Self) {
        let (tx, rx) = sync_channel(CHANNEL_DEPTH);
        (tx, Self::from_channel(stream_id, rx))
    }

    /// Spawns a producer thread that reads, timestamps and preprocesses
    /// frames to `size × size`.
    pub fn spawn(stream_id: impl Into<String>, mut reader: Box<dyn FrameReader>, clock: Clock, size: usize) -> Self {
        let (tx, rx) = sync_channel(CHANNEL_DEPTH);
        let handle = thread::spawn(move || {
            let mut index = 0u64;
            loop {
                let msg = match reader.next_frame() {
                    Ok(None) => return,
                    Ok(Some(raw)) => {
                        let t = match clock {
                            Clock::Nominal(fps) => index as f64 / fps,
                            Clock::Arrival(start) => start.elapsed().as_secs_f64(),
                        };
                        preprocess(&raw, size).map(|frame| TimedFrame {
                            frame_index: index,
                            t,
                            frame,
                        })
                    }
                    Err(e) => Err(e),
                };
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    return;
                }
                index += 1;
            }
        });
        let mut s = Self::from_channel(stream_id, rx);
        s.handle = Some(handle);
        s
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn finish(&mut self) {
        self.done = true;
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Origin of one batch slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stream_id: String,
    pub frame_index: u64,
    pub t: f64,
}

/// Frames from several streams stacked for one inference call.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamBatch {
    /// `(batch_n, W, W, 3)`; `None` for an empty batch.
    pub frames: Option<Tensor4<f32>>,
    pub provenance: Vec<Provenance>,
}

impl StreamBatch {
    pub fn from_frames(slots: Vec<(String, TimedFrame)>) -> Result<Self> {
        if slots.is_empty() {
            return Ok(Self::default());
        }
        let refs: Vec<&FrameTensor> = slots.iter().map(|(_, f)| &f.frame).collect();
        let frames = FrameTensor::stack(&refs)?;
        let provenance = slots
            .iter()
            .map(|(id, f)| Provenance {
                stream_id: id.clone(),
                frame_index: f.frame_index,
                t: f.t,
            })
            .collect();
        Ok(Self {
            frames: Some(frames),
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

/// Up to `n_f` consecutive frames from every live stream. Streams with
/// nothing ready before the shared deadline are skipped for this batch;
/// ended streams are marked done and failed ones are dropped with a
/// warning. An all-stalled round yields an empty batch.
pub fn collect_batch(streams: &mut [LiveStream], n_f: usize, timeout: Duration) -> Result<StreamBatch> {
    if n_f == 0 {
        return Err(Error::Param("frames per stream must be at least 1".into()));
    }
    let deadline = Instant::now() + timeout;
    let mut slots = Vec::new();
    for s in streams.iter_mut().filter(|s| !s.done) {
        for _ in 0..n_f {
            let wait = deadline.saturating_duration_since(Instant::now());
            match s.rx.recv_timeout(wait) {
                Ok(Ok(f)) => slots.push((s.stream_id.clone(), f)),
                Ok(Err(e)) => {
                    log::warn!("stream {} dropped: {e}", s.stream_id);
                    s.failure = Some(e.to_string());
                    s.finish();
                    break;
                }
                Err(RecvTimeoutError::Timeout) => break,
                Err(RecvTimeoutError::Disconnected) => {
                    s.finish();
                    break;
                }
            }
        }
    }
    StreamBatch::from_frames(slots)
}
