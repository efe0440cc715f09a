use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DropObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StableState {
    #[default]
    Unknown,
    Forming,
    Formed,
}

impl StableState {
    fn of(s: u8) -> Self {
        if s == 0 {
            Self::Forming
        } else {
            Self::Formed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DripEvent {
    pub t: f64,
    pub drop_count: u64,
    pub cell: (usize, usize),
}

/// Debounced drop counter for one stream.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CounterState {
    pub stable: StableState,
    pub pending: Option<u8>,
    pub pending_run: usize,
    pending_t: f64,
    pending_cell: (usize, usize),
    pub drop_count: u64,
    pub detach_times: Vec<f64>,
    last_t: Option<f64>,
}

/// Feeds one observation. A raw state becomes stable after `debounce_m`
/// consecutive detected frames; undetected frames neither extend nor break
/// the pending run. A stable `Formed → Forming` change is a detach, stamped
/// with the first frame of the new run.
pub fn update_counter(
    state: &CounterState,
    obs: &DropObservation,
    debounce_m: usize,
) -> Result<(CounterState, Option<DripEvent>)> {
    if debounce_m == 0 {
        return Err(Error::Param("debounce_m must be at least 1".into()));
    }
    if let Some(prev) = state.last_t {
        if obs.t < prev {
            return Err(Error::TimeRegression { t: obs.t, prev });
        }
    }
    let mut next = state.clone();
    next.last_t = Some(obs.t);
    if !obs.detected {
        return Ok((next, None));
    }
    if next.pending == Some(obs.s_hat) {
        next.pending_run += 1;
    } else {
        next.pending = Some(obs.s_hat);
        next.pending_run = 1;
        next.pending_t = obs.t;
        next.pending_cell = obs.cell;
    }
    let candidate = StableState::of(obs.s_hat);
    if next.pending_run < debounce_m || candidate == next.stable {
        return Ok((next, None));
    }
    let detach = next.stable == StableState::Formed && candidate == StableState::Forming;
    next.stable = candidate;
    if !detach {
        return Ok((next, None));
    }
    if next.detach_times.last().is_some_and(|&t| next.pending_t <= t) {
        return Err(Error::DuplicateTimestamp(next.pending_t));
    }
    next.drop_count += 1;
    next.detach_times.push(next.pending_t);
    let event = DripEvent {
        t: next.pending_t,
        drop_count: next.drop_count,
        cell: next.pending_cell,
    };
    Ok((next, Some(event)))
}
