//! Camera-based IV drip monitoring.
//!
//! A small fully convolutional network classifies each frame of a drip
//! chamber video into "drop forming" (state 0) or "drop well-formed"
//! (state 1) and locates it on an `S×S` grid. Per-stream state machines
//! turn the decoded states into drop-detach events and windowed flow-rate
//! estimates in drops per minute.
//!
//! | module | role |
//! |---|---|
//! | [`tensor_nn`] | layers, backward passes, SGD |
//! | [`dropnet`] | the drop-state network and its weight file |
//! | [`synthdrip`] | synthetic drip scenes, labels, datasets, oracle streams |
//! | [`trainer`] | grid loss, training loop, evaluation |
//! | [`dripcount`] | state decoding, debounced drop counting, flow rate, framing alarm |
//! | [`streamd`] | multi-stream batching, pipeline, throughput bench |

pub mod dripcount;
pub mod dropnet;
pub mod error;
pub mod exec;
pub mod frame;
pub mod streamd;
pub mod synthdrip;
pub mod tensor_nn;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Exec;
