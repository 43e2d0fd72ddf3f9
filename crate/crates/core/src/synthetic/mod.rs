//! Synthetic designs, ground truths and datasets for the three tasks.

mod data;
mod sampler;
mod truth;

pub use data::{gen_binary, gen_multiclass, gen_regression, Dataset};
pub use sampler::{FeatureSampler, SamplerKind};
pub use truth::{
    composition_tau, make_ground_truth, ClassTag, CompositionKind, GroundTruth, MAX_SERIES_TERMS,
    SERIES_TAIL_TOL,
};
