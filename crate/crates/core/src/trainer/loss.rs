use serde::{Deserialize, Serialize};

use crate::dropnet::OutputGrid;
use crate::error::{shape_err, Result};
use crate::synthdrip::GridLabel;
use crate::tensor_nn::Scalar;

pub const LOG_CLAMP: f64 = 1e-7;

/// Which grid loss to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `−Σ [Y·log Ŷ + (1−Y)·log(1−Ŷ)]` over every cell and layer.
    #[default]
    Bce,
    /// `−Σ Y·log Ŷ`: only the hot cell contributes.
    PositiveOnly,
}

fn clamp(v: f64) -> f64 {
    v.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

fn check_len(y: usize, yhat: usize) -> Result<()> {
    if y != yhat {
        return shape_err(format!("loss: label has {y} cells, prediction {yhat}"));
    }
    Ok(())
}

/// Summed loss of one grid, accumulated in f64.
pub fn grid_loss<T: Scalar>(y: &[f32], yhat: &[T], kind: LossKind) -> Result<f64> {
    check_len(y.len(), yhat.len())?;
    Ok(y.iter()
        .zip(yhat)
        .map(|(&t, &p)| {
            let (t, p) = (t as f64, clamp(p.as_f64()));
            match kind {
                LossKind::Bce => -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()),
                LossKind::PositiveOnly => -t * p.ln(),
            }
        })
        .sum())
}

/// `∂L/∂Ŷ` scaled by `scale`. Denominators use the clamped prediction so
/// saturated outputs still receive a bounded gradient.
pub fn grid_loss_grad<T: Scalar>(y: &[f32], yhat: &[T], kind: LossKind, scale: f64) -> Result<Vec<T>> {
    check_len(y.len(), yhat.len())?;
    Ok(y.iter()
        .zip(yhat)
        .map(|(&t, &p)| {
            let (t, p) = (t as f64, clamp(p.as_f64()));
            let g = match kind {
                LossKind::Bce => -t / p + (1.0 - t) / (1.0 - p),
                LossKind::PositiveOnly => -t / p,
            };
            T::of(g * scale)
        })
        .collect())
}

/// Full binary cross-entropy of one prediction against its label.
pub fn loss(label: &GridLabel, grid: &OutputGrid) -> Result<f64> {
    if label.size != grid.size() {
        return shape_err(format!("loss: label grid {} vs prediction grid {}", label.size, grid.size()));
    }
    grid_loss(&label.values(), grid.values(), LossKind::Bce)
}
