use serde::{Deserialize, Serialize};

use crate::dropnet::OutputGrid;
use crate::error::{Error, Result};

/// Decoded drop state of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropObservation {
    pub t: f64,
    pub detected: bool,
    pub s_hat: u8,
    pub cell: (usize, usize),
    /// The grid peak, reported even when below the threshold.
    pub confidence: f32,
    pub grid_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingAlarm {
    pub t: f64,
    pub cell: (usize, usize),
    pub margin_cells: usize,
}

/// `ŝ = argmax_k max_{i,j} Ŷ[i,j,k]`, with detection gated on the peak
/// reaching `tau`. Ties go to the lower `k`, then to the first cell in
/// storage order (row `j`, then column `i`).
pub fn extract_observation(grid: &OutputGrid, t: f64, tau: f32) -> Result<DropObservation> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Param(format!("threshold must be in (0, 1), got {tau}")));
    }
    let s = grid.size();
    let mut best = [(f32::NEG_INFINITY, (0, 0)); 2];
    for j in 0..s {
        for i in 0..s {
            for (k, b) in best.iter_mut().enumerate() {
                let v = grid.get(i, j, k);
                if v > b.0 {
                    *b = (v, (i, j));
                }
            }
        }
    }
    let k = if best[1].0 > best[0].0 { 1 } else { 0 };
    let (peak, cell) = best[k];
    Ok(DropObservation {
        t,
        detected: peak >= tau,
        s_hat: k as u8,
        cell,
        confidence: peak,
        grid_size: s,
    })
}

/// Alarm iff the cell lies strictly closer than `margin_cells` to an edge.
pub fn check_framing(obs: &DropObservation, margin_cells: usize) -> Option<FramingAlarm> {
    let (i, j) = obs.cell;
    let last = obs.grid_size.saturating_sub(1);
    let dist = i.min(j).min(last.saturating_sub(i)).min(last.saturating_sub(j));
    (dist < margin_cells).then_some(FramingAlarm {
        t: obs.t,
        cell: obs.cell,
        margin_cells,
    })
}
