//! Competing sequential tests.
//!
//! All of them implement [`SequentialDetector`](crate::sequential::SequentialDetector):
//! the two CUSUM variants operate on the same univariate nominal statistic as
//! the tail-probability detector, the rest work on raw observations through
//! sliding windows.

mod itmcd;
mod nn_online;
mod npcusum;
mod odit;
mod quanttree;

pub use itmcd::{itmcd_kl_estimate, Itmcd, ItmcdParams};
pub use nn_online::{knn_digraph, max_standardized, nn_online_statistic, NnOnline, NnOnlineParams, PermutationMoments};
pub use npcusum::{npcusum_update, NpCusum};
pub use odit::{odit_threshold, Odit};
pub use quanttree::{chi_squared_statistic, quanttree_build, QuantTreePartition, SlidingChiSquared};

/// Distances below this are clamped before taking logarithms.
pub const MIN_DISTANCE: f64 = 1e-12;
