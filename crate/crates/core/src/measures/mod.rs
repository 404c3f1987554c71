//! Empirical measures as weighted point clouds.

pub mod cloud;
pub mod energy;
pub mod partition;

pub use cloud::{
    brolin_cloud, check_seed, merge_atoms, pullback_dirac_mc, pullback_dirac_tree, pushforward_mobius,
    uniform_circle_cloud, Atom, Method, Provenance, WeightedCloud, DEFAULT_TREE_BUDGET,
};
pub use energy::energy_distance;
pub use partition::{
    metric_entropy_estimate, partition_entropy, preimage_mass, GridPartition, MetricEntropyReport,
    DEFAULT_ORBIT_BUDGET,
};
