//! Grid loss, the seeded train/validation protocol and evaluation metrics.

mod eval;
mod loss;
mod train;


pub use eval::{evaluate, evaluate_grids, load_batch, neighbor_cell, Metrics};
pub use loss::{grid_loss, grid_loss_grad, loss, LossKind, LOG_CLAMP};
pub use train::{split_indices, train, write_history, EpochRecord, Schedule, TrainConfig, TrainHistory};
