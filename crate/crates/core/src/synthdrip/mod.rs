//! Synthetic drip-chamber scenes with exact ground truth.
//!
//! Frames show a drop (bright ellipse with a specular highlight) hanging
//! from a nozzle over a textured, tinted background, under a global gain
//! and additive sensor noise. State 0 is a small flat bulge, state 1 a tall
//! well-formed drop. On top of the renderer sit the grid labels, the
//! zoom-and-crop augmentation, balanced dataset planning and oracle drip
//! streams with known detach instants.

mod augment;
mod dataset;
mod label;
mod scene;
mod stream;

pub use augment::{augment, centered_offset, ZOOM_RANGE};
pub use dataset::{
    build_dataset, materialize, read_manifest, write_dataset, write_manifest, DatasetSpec, DiskDataset, Manifest,
    SampleRecord, SampleSource, SceneVariety, SynthDataset, MANIFEST_FILE,
};
pub use label::{make_label, GridLabel, LabeledSample};
pub use scene::{render_frame, render_frame_keyed, render_radiance, BackgroundStyle, DropShape, SceneSpec};
pub use stream::{gen_stream, DripStreamSpec, FrameTruth, OracleStream, PeriodSchedule, DEFAULT_POST_ROLL};

/// SplitMix64 finalizer over `seed ^ key`; derives independent sub-seeds.
pub fn mix_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
