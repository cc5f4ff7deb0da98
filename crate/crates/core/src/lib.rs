//! Adaptive graph-convolutional subspace clustering (AGCSC).
//!
//! The model learns a doubly stochastic, symmetric, nonnegative coefficient
//! matrix `C` and uses it twice: as the self-expressive reconstruction
//! coefficients and, through the graph convolutional operator
//! `S = (C + I) / 2`, to aggregate the features it reconstructs from. The
//! pipeline is
//!
//! 1. [`solver::solve`]: ADMM iterations producing `C*` and `F* = S X`,
//! 2. optional [`graph::threshold_m_largest`] post-processing (TAGCSC),
//! 3. [`graph::affinity_from_coefficients`] then
//!    [`spectral::cluster_affinity`] for labels,
//! 4. [`metrics::accuracy`] and [`metrics::nmi`] against ground truth.
//!
//! [`experiment::run_experiment`] drives the whole pipeline over parameter
//! grids and writes csv/json artifacts.

pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod solver;
pub mod spectral;

pub use data::{
    generate_union_of_subspaces, load_dense_matrix, load_labels, normalize_pixel_range,
    save_dense_matrix, DataMatrix, LabelVector, MatrixFormat, SyntheticSpec,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, DataSource, ExperimentConfig, ExperimentOutcome, RunRecord};
pub use graph::{affinity_from_coefficients, threshold_m_largest, Affinity, Gco};
pub use metrics::{accuracy, nmi};
pub use solver::{solve, SolverConfig, SolverResult, SolverState};
pub use spectral::cluster_affinity;

/// Mixes a base seed with a stream index (SplitMix64 finalizer) so that
/// independent jobs get decorrelated RNG seeds regardless of scheduling.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
