//! Hypothesis generation and the affinity tensor with its gradient path.

mod gate;
mod params;
mod provider;

pub use gate::{generate_hypotheses, ConnectionGateConfig};
pub use params::{AffinityParams, MIN_POSITION_SCALE};
pub use provider::{
    backprop_affinity, compute_affinity, pair_shape, reshape_c_to_a, AffinityTensorBundle, TapeEntry,
};
