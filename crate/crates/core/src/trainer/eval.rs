use serde::{Deserialize, Serialize};

use crate::dripcount::{extract_observation, DEFAULT_TAU};
use crate::dropnet::{DropNet, OutputGrid};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::FrameTensor;
use crate::synthdrip::{GridLabel, SampleSource};
use crate::tensor_nn::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub state_accuracy: f64,
    pub cell_accuracy: f64,
    pub mean_loss: f64,
}

/// Same cell or one of its 8 neighbours.
pub fn neighbor_cell(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

/// State from the decoded `ŝ`, position from the peak cell of layer `ŝ`.
/// The detection threshold plays no part here; it only gates counting.
pub fn evaluate_grids(grids: &[OutputGrid], labels: &[GridLabel]) -> Result<Metrics> {
    if grids.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", grids.len(), labels.len())));
    }
    if grids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut state_hits, mut cell_hits, mut total_loss) = (0usize, 0usize, 0.0);
    for (g, l) in grids.iter().zip(labels) {
        let obs = extract_observation(g, 0.0, DEFAULT_TAU)?;
        if obs.s_hat == l.state() {
            state_hits += 1;
        }
        if neighbor_cell(obs.cell, l.cell()) {
            cell_hits += 1;
        }
        total_loss += super::loss(l, g)?;
    }
    let n = grids.len() as f64;
    Ok(Metrics {
        samples: grids.len(),
        state_accuracy: state_hits as f64 / n,
        cell_accuracy: cell_hits as f64 / n,
        mean_loss: total_loss / n,
    })
}

/// Renders (or reads) the given samples into one batch tensor.
pub fn load_batch(source: &dyn SampleSource, idx: &[usize], grid: usize, exec: Exec) -> Result<(Tensor4<f32>, Vec<GridLabel>)> {
    let samples: Vec<_> = exec
        .map_range(idx.len(), |n| source.sample(idx[n]))
        .into_iter()
        .collect::<Result<_>>()?;
    let labels = samples.iter().map(|s| s.label(grid)).collect::<Result<Vec<_>>>()?;
    let frames: Vec<&FrameTensor> = samples.iter().map(|s| &s.frame).collect();
    Ok((FrameTensor::stack(&frames)?, labels))
}

pub(crate) const EVAL_BATCH: usize = 32;

pub(crate) fn predict(net: &DropNet, source: &dyn SampleSource, idx: &[usize]) -> Result<(Vec<OutputGrid>, Vec<GridLabel>)> {
    let (mut grids, mut labels) = (Vec::with_capacity(idx.len()), Vec::with_capacity(idx.len()));
    for chunk in idx.chunks(EVAL_BATCH) {
        let (x, l) = load_batch(source, chunk, net.grid_size(), net.network.exec)?;
        grids.extend(net.forward(&x)?);
        labels.extend(l);
    }
    Ok((grids, labels))
}

/// Inference-mode metrics over the whole source.
pub fn evaluate(net: &DropNet, source: &dyn SampleSource) -> Result<Metrics> {
    let idx: Vec<usize> = (0..source.len()).collect();
    let (grids, labels) = predict(net, source, &idx)?;
    evaluate_grids(&grids, &labels)
}
