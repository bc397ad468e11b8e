//! Synthetic panels with known ground truth and brute-force oracles for
//! the clustering and regression code in `dpr-core`.

pub mod oracle;
pub mod scenarios;
pub mod synth;

pub use oracle::{
    adjusted_rand_index, brute_force_dbscan, kkt_violation, noise_as_singletons, penalized_objective,
    reference_objective_min, same_partition, ReferenceFit,
};
pub use synth::{dominant_profiles, generate_panel, GroundTruth, SyntheticSpec};
