//! Multi-stream engine: frame sources, batch assembly across streams,
//! inference with per-stream routing, the end-to-end pipeline, the
//! throughput bench and heat-map export.
//!
//! Each source runs on its own producer thread and delivers preprocessed
//! frames over a bounded channel. [`collect_batch`] takes up to `n_f`
//! frames from each live stream, skipping streams that stay silent past
//! the batch timeout. One inference call covers the whole batch and the
//! grids are routed back to their streams in frame order, so the results
//! never depend on how frames were batched.

mod bench;
mod container;
mod heatmap;
mod pipeline;
mod preprocess;
mod route;
mod source;


pub use bench::{bench, max_streams, BenchConfig, BenchReport, StageLatency, ThroughputReport};
pub use container::{
    decode_drpv, encode_drpv, read_drpv, write_drpv, DrpvHeader, DrpvReader, DRPV_HEADER_LEN, DRPV_MAGIC, DRPV_VERSION,
};
pub use heatmap::{emit_heatmap, quantize};
pub use pipeline::{
    run_live, run_pipeline, write_json, BatchSection, ModelSection, OutputSection, PipelineConfig, PipelineReport,
    StreamSummary, REPORT_FILE,
};
pub use preprocess::{center_crop, preprocess};
pub use route::{
    infer_and_route, EventKind, EventLog, EventRecord, RoutedOutput, Router, EVENTS_FILE, FLOW_FILE, FLOW_HEADER,
};
pub use source::{
    collect_batch, open_source, Clock, FrameReader, LiveStream, PpmDirReader, Provenance, RawPipeReader, StreamBatch,
    StreamSource, TimedFrame, Transport, CHANNEL_DEPTH,
};
