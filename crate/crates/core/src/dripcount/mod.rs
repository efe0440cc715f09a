//! Per-stream measurement: decoding the network output into a drop state,
//! debounced counting of `1 → 0` detach transitions, windowed flow rate in
//! drops per minute, and the framing alarm.

mod counter;
mod flow;
mod observe;

#[cfg(test)]
mod tests;

pub use counter::{update_counter, CounterState, DripEvent, StableState};
pub use flow::{flow_rate, FlowEstimator, FlowRateSample};
pub use observe::{check_framing, extract_observation, DropObservation, FramingAlarm};

use serde::{Deserialize, Serialize};

use crate::dropnet::OutputGrid;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f32 = 0.3;
pub const DEFAULT_DEBOUNCE: usize = 2;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_MARGIN: usize = 2;

/// Counter knobs, the `counter` section of a pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterConfig {
    pub tau: f32,
    pub debounce_m: usize,
    pub window_n: usize,
    pub margin_cells: usize,
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            debounce_m: DEFAULT_DEBOUNCE,
            window_n: DEFAULT_WINDOW,
            margin_cells: DEFAULT_MARGIN,
        }
    }
}

impl CounterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if self.debounce_m == 0 {
            return Err(Error::Config("debounce_m must be at least 1".into()));
        }
        if self.window_n == 0 {
            return Err(Error::Config("window_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// What one frame produced for its stream.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitorOutput {
    Detach(DripEvent),
    Flow(FlowRateSample),
    Alarm(FramingAlarm),
}

/// The full per-stream chain: observation, counter, flow estimator and an
/// edge-triggered framing alarm (raised when a detected drop enters the
/// margin band, re-armed once it leaves).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamMonitor {
    pub config: CounterConfig,
    pub counter: CounterState,
    pub flow: FlowEstimator,
    alarm_active: bool,
}

impl StreamMonitor {
    pub fn new(config: CounterConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            counter: CounterState::default(),
            flow: FlowEstimator::new(config.window_n)?,
            alarm_active: false,
        })
    }

    pub fn drop_count(&self) -> u64 {
        self.counter.drop_count
    }

    pub fn push(&mut self, grid: &OutputGrid, t: f64) -> Result<Vec<MonitorOutput>> {
        let obs = extract_observation(grid, t, self.config.tau)?;
        self.observe(&obs)
    }

    pub fn observe(&mut self, obs: &DropObservation) -> Result<Vec<MonitorOutput>> {
        let (next, event) = update_counter(&self.counter, obs, self.config.debounce_m)?;
        self.counter = next;
        let mut out = Vec::new();
        if obs.detected {
            match check_framing(obs, self.config.margin_cells) {
                Some(alarm) if !self.alarm_active => {
                    self.alarm_active = true;
                    out.push(MonitorOutput::Alarm(alarm));
                }
                Some(_) => {}
                None => self.alarm_active = false,
            }
        }
        if let Some(ev) = event {
            let sample = self.flow.push(ev.t)?;
            out.push(MonitorOutput::Detach(ev));
            if let Some(q) = sample {
                out.push(MonitorOutput::Flow(q));
            }
        }
        Ok(out)
    }
}
