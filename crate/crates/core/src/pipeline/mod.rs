//! Online tracking: sliding windows, virtual candidates backed by motion
//! predictions, and target management.

mod config;
mod quality;
mod tracker;
mod virtuals;

pub use config::PipelineConfig;
pub use quality::{ConfidenceQuality, GroundTruthQuality, QualityEstimator};
pub use tracker::{associate, run_sequence, Track, TrackState, TrackStatus, Tracker, Trajectory};
pub use virtuals::resolve_virtuals;
