//! The drop-state network: configuration, construction, inference and the
//! `DRPW` weight file.

mod config;
mod grid;
mod net;
pub mod weights;

pub use config::{LayerSpec, NetConfig, DESK_WIDTHS, DROPOUT_RATE, REFERENCE_WIDTHS};
pub use grid::OutputGrid;
pub use net::DropNet;
pub use weights::{load_weights, save_weights};

#[cfg(test)]
mod tests;
