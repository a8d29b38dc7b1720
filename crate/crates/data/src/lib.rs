//! Training-corpus machinery: tabletop problem sampling, plan-and-filter
//! data generation with maximum-payload labeling, limit-derived
//! normalization, and the binary dataset container.

pub mod dataset;
pub mod normalize;
pub mod sampling;

pub use dataset::{generate_dataset, load_dataset, save_dataset, DataError, Dataset, DatagenConfig, Sample};
pub use normalize::NormalizationStats;
pub use sampling::{bundled_problems, bundled_scene, bundled_workspace, sample_problem, WorkspaceSpec};
