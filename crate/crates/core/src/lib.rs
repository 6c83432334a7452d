//! Online multi-object tracking by differentiable multi-dimensional assignment.
//!
//! Candidates from `K + 1` consecutive frames are linked into hypothesis
//! trajectories, scored by a learnable affinity provider, and assigned by a
//! rank-1 tensor power iteration followed by alternating l1 normalization.
//! Both layers have analytic backward passes, so the provider parameters can
//! be trained end to end against ground-truth assignments. The tracker adds
//! per-frame virtual candidates backed by single-object predictions and a
//! target manager that handles entering, coasting and exiting targets.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the `*64` aliases
//! below name the `f64` instantiations used by the command-line tool.

pub mod affinity;
pub mod check;
pub mod error;
pub mod evalio;
pub mod index;
pub mod kv;
pub mod mda;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod tensor;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BBox64 = types::BBox<f64>;
pub type Candidate64 = types::Candidate<f64>;
pub type AssociationBatch64 = types::AssociationBatch<f64>;
pub type AffinityParams64 = affinity::AffinityParams<f64>;
pub type GateConfig64 = affinity::ConnectionGateConfig<f64>;
pub type AssignmentState64 = mda::AssignmentState<f64>;
pub type Matrix64 = mda::Matrix<f64>;
pub type Tensor64 = tensor::DenseTensor<f64>;
pub type PipelineConfig64 = pipeline::PipelineConfig<f64>;
pub type Tracker64 = pipeline::Tracker<f64>;
pub type Trajectory64 = pipeline::Trajectory<f64>;
