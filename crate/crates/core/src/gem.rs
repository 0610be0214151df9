//! Bipartite kNN (BP-GEM) nominal baseline.
//!
//! The nominal sample is split once into a reference set S₁ and a
//! calibration set S₂. Every statistic, offline or online, is the sum of the
//! distances to the k nearest points of S₁, so the online phase never has to
//! rebuild a neighbour graph.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::knn::knn_sum_distance;
use crate::points::PointSet;

/// Identifier of the partition algorithm, persisted with baselines.
pub const PARTITION_PRNG: &str = "chacha8/rand_chacha-0.9/partial-fisher-yates/v1";

/// Default neighbour count.
pub const DEFAULT_K: usize = 4;

/// Uniform random split of `data` into `n1` reference points and the rest.
///
/// Both halves keep the original row order.
pub fn partition_nominal(data: &PointSet, n1: usize, seed: u64) -> Result<(PointSet, PointSet)> {
    let (i1, i2) = partition_indices(data.len(), n1, seed)?;
    Ok((data.select(&i1), data.select(&i2)))
}

/// Index form of [`partition_nominal`].
pub fn partition_indices(n: usize, n1: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n1 == 0 || n1 >= n {
        return Err(Error::invalid(alloc::format!(
            "n1 = {n1} must satisfy 1 <= n1 < {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n1 {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let (a, b) = idx.split_at_mut(n1);
    a.sort_unstable();
    b.sort_unstable();
    Ok((a.to_vec(), b.to_vec()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GemBaseline {
    s1: PointSet,
    k: usize,
    sorted_stats: Vec<f64>,
    seed: u64,
}

impl GemBaseline {
    /// Offline phase: partition, score S₂ against S₁, sort.
    pub fn build(data: &PointSet, n1: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > n1 {
            return Err(Error::invalid(alloc::format!("k = {k} must satisfy 1 <= k <= n1 = {n1}")));
        }
        let (s1, s2) = partition_nominal(data, n1, seed)?;
        Self::from_sets(s1, &s2, k, seed)
    }

    /// Builds from an explicit reference/calibration split.
    pub fn from_sets(s1: PointSet, s2: &PointSet, k: usize, seed: u64) -> Result<Self> {
        if s2.is_empty() {
            return Err(Error::invalid("calibration set S2 is empty"));
        }
        check_dim(s1.dim(), s2.dim())?;
        let mut stats = s2
            .rows()
            .map(|x| knn_sum_distance(x, &s1, k))
            .collect::<Result<Vec<_>>>()?;
        stats.sort_by(f64::total_cmp);
        Ok(GemBaseline { s1, k, sorted_stats: stats, seed })
    }

    /// Reassembles a baseline from persisted parts, checking invariants.
    pub fn from_parts(s1: PointSet, k: usize, sorted_stats: Vec<f64>, seed: u64) -> Result<Self> {
        if k == 0 || k > s1.len() {
            return Err(Error::invalid("k out of range for the reference set"));
        }
        validate_sorted_stats(&sorted_stats)?;
        Ok(GemBaseline { s1, k, sorted_stats, seed })
    }

    /// Online phase summary statistic for one point.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        knn_sum_distance(x, &self.s1, self.k)
    }

    pub fn reference(&self) -> &PointSet {
        &self.s1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.s1.dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n1(&self) -> usize {
        self.s1.len()
    }

    pub fn n2(&self) -> usize {
        self.sorted_stats.len()
    }

    pub fn sorted_stats(&self) -> &[f64] {
        &self.sorted_stats
    }
}

/// Free-function form of [`GemBaseline::score`].
pub fn gem_score(baseline: &GemBaseline, x: &[f64]) -> Result<f64> {
    baseline.score(x)
}

pub(crate) fn validate_sorted_stats(stats: &[f64]) -> Result<()> {
    if stats.is_empty() {
        return Err(Error::invalid("nominal statistics are empty"));
    }
    if stats.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("nominal statistics must be finite and nonnegative"));
    }
    if stats.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("nominal statistics are not sorted"));
    }
    Ok(())
}
