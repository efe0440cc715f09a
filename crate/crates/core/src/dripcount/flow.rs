use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRateSample {
    pub t: f64,
    /// Drops per minute.
    pub q: f64,
    pub window_n: usize,
}

fn check_window(window_n: usize) -> Result<()> {
    if window_n == 0 {
        return Err(Error::Param("flow window must be at least 1".into()));
    }
    Ok(())
}

/// `Q = 60·N / (tᵢ − tᵢ₋ₙ)` at the latest detach time, once `N + 1`
/// detaches exist.
pub fn flow_rate(detach_times: &[f64], window_n: usize) -> Result<Option<FlowRateSample>> {
    check_window(window_n)?;
    if detach_times.len() <= window_n {
        return Ok(None);
    }
    let window = &detach_times[detach_times.len() - window_n - 1..];
    for w in window.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::DuplicateTimestamp(w[1]));
        }
    }
    let (first, last) = (window[0], window[window_n]);
    Ok(Some(FlowRateSample {
        t: last,
        q: 60.0 * window_n as f64 / (last - first),
        window_n,
    }))
}

/// Incremental [`flow_rate`] keeping only the last `N + 1` times.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimator {
    window_n: usize,
    times: VecDeque<f64>,
}

impl FlowEstimator {
    pub fn new(window_n: usize) -> Result<Self> {
        check_window(window_n)?;
        Ok(Self {
            window_n,
            times: VecDeque::with_capacity(window_n + 1),
        })
    }

    pub fn window_n(&self) -> usize {
        self.window_n
    }

    pub fn push(&mut self, t: f64) -> Result<Option<FlowRateSample>> {
        if self.times.back().is_some_and(|&prev| t <= prev) {
            return Err(Error::DuplicateTimestamp(t));
        }
        if self.times.len() == self.window_n + 1 {
            self.times.pop_front();
        }
        self.times.push_back(t);
        flow_rate(self.times.make_contiguous(), self.window_n)
    }
}
