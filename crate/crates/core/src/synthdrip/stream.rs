use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameTensor;

use super::scene::{render_frame_keyed, SceneSpec};

/// Piecewise-constant drop period: `(start_time_s, period_s)` pairs sorted
/// by start time, the first starting at 0. A period that begins at time `t`
/// uses the entry in force at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSchedule(pub Vec<(f64, f64)>);

impl PeriodSchedule {
    pub fn constant(period: f64) -> Self {
        Self(vec![(0.0, period)])
    }

    /// `before` until `at`, then `after`.
    pub fn step(before: f64, after: f64, at: f64) -> Self {
        Self(vec![(0.0, before), (at, after)])
    }

    pub fn period_at(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map(|(_, p)| *p)
            .unwrap_or(self.0[0].1)
    }

    fn min_period(&self) -> f64 {
        self.0.iter().map(|(_, p)| *p).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DripStreamSpec {
    pub duration: f64,
    pub fps: f64,
    pub period: PeriodSchedule,
    /// Fraction of each period spent in state 0.
    pub forming_fraction: f64,
    pub scene: SceneSpec,
    /// Extra footage after `duration`, so a detach exactly at the end is
    /// still followed by enough frames to be confirmed.
    #[serde(default = "default_post_roll")]
    pub post_roll: f64,
}

pub const DEFAULT_POST_ROLL: f64 = 0.5;

fn default_post_roll() -> f64 {
    DEFAULT_POST_ROLL
}

impl DripStreamSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Param(m));
        if !(self.fps > 0.0) {
            return fail(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.duration >= 0.0) {
            return fail("duration must be >= 0".into());
        }
        if self.period.0.is_empty() || self.period.0[0].0 != 0.0 {
            return fail("period schedule must start at t = 0".into());
        }
        if self.period.0.windows(2).any(|w| w[1].0 <= w[0].0) {
            return fail("period schedule start times must increase".into());
        }
        let p = self.period.min_period();
        if !(p > 2.0 / self.fps) {
            return fail(format!(
                "drop period {p} s is too short to observe both states at {} fps",
                self.fps
            ));
        }
        if !(self.forming_fraction > 0.0 && self.forming_fraction < 1.0) {
            return fail(format!(
                "forming fraction {} outside (0, 1)",
                self.forming_fraction
            ));
        }
        if !(self.post_roll >= 0.0) {
            return fail("post-roll must be >= 0".into());
        }
        self.scene.validate()
    }
}

/// Ground truth for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_index: u64,
    pub t_seconds: f64,
    pub state: u8,
    /// Growth within the current state, `[0, 1)`.
    #[serde(skip)]
    pub phase: f64,
}

/// A synthetic drip video with exact per-frame states and detach instants.
/// Frames are rendered on demand.
#[derive(Debug, Clone)]
pub struct OracleStream {
    pub spec: DripStreamSpec,
    pub truth: Vec<FrameTruth>,
    /// Every 1→0 instant in `(0, duration]`.
    pub detach_times: Vec<f64>,
}

/// Each period starts with the drop forming (state 0) and switches to a
/// well-formed drop (state 1) after `forming_fraction` of it; the drop
/// detaches at the end of the period, where the next one starts.
pub fn gen_stream(spec: &DripStreamSpec) -> Result<OracleStream> {
    spec.validate()?;
    let horizon = spec.duration + spec.post_roll;
    // period boundaries covering the whole horizon
    let mut starts = vec![0.0];
    while *starts.last().unwrap() <= horizon {
        let t = *starts.last().unwrap();
        starts.push(t + spec.period.period_at(t));
    }
    let eps = 1e-9;
    let detach_times = starts[1..]
        .iter()
        .copied()
        .filter(|&t| t <= spec.duration + eps)
        .collect();

    let n_frames = (horizon * spec.fps).ceil() as u64;
    let ff = spec.forming_fraction;
    let mut period_idx = 0;
    let mut truth = Vec::with_capacity(n_frames as usize);
    for k in 0..n_frames {
        let t = k as f64 / spec.fps;
        while starts[period_idx + 1] <= t + eps {
            period_idx += 1;
        }
        let (start, end) = (starts[period_idx], starts[period_idx + 1]);
        let phase = ((t - start) / (end - start)).clamp(0.0, 1.0 - f64::EPSILON);
        let (state, within) = if phase < ff {
            (0, phase / ff)
        } else {
            (1, (phase - ff) / (1.0 - ff))
        };
        truth.push(FrameTruth {
            frame_index: k,
            t_seconds: t,
            state,
            phase: within,
        });
    }
    Ok(OracleStream {
        spec: spec.clone(),
        truth,
        detach_times,
    })
}

impl OracleStream {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn render(&self, k: usize) -> Result<FrameTensor> {
        let tr = &self.truth[k];
        let (x, y) = self.spec.scene.dripper;
        render_frame_keyed(&self.spec.scene, x, y, tr.state, tr.phase, tr.frame_index + 1)
    }

    /// `truth.jsonl` and `detach.jsonl`.
    pub fn write_truth(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(fs::File::create(dir.join("truth.jsonl"))?);
        for tr in &self.truth {
            serde_json::to_writer(&mut out, tr)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let mut out = BufWriter::new(fs::File::create(dir.join("detach.jsonl"))?);
        for t in &self.detach_times {
            serde_json::to_writer(&mut out, &serde_json::json!({ "t_seconds": t }))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}
