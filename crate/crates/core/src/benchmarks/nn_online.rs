//! Online kNN-graph change-point scan.
//!
//! For the current window of `W` observations (oldest first) a directed
//! `k`-nearest-neighbour graph is built. For every candidate split leaving
//! between `n0` and `n1` points in the newer group, `R` counts the directed
//! edges joining the two groups; few crossing edges indicate a change. `R` is
//! standardized with its mean and variance under random relabeling of the
//! window, estimated from uniformly random permutations, and the statistic is
//! the largest standardized deficit over the candidate splits.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::knn::k_nearest;
use crate::points::PointSet;
use crate::sequential::SequentialDetector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NnOnlineParams {
    pub window: usize,
    pub k: usize,
    /// Smallest newer-group size scanned.
    pub n0: usize,
    /// Largest newer-group size scanned.
    pub n1: usize,
    pub permutations: usize,
}

impl Default for NnOnlineParams {
    fn default() -> Self {
        NnOnlineParams { window: 50, k: 10, n0: 10, n1: 40, permutations: 200 }
    }
}

impl NnOnlineParams {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n0 > self.n1 || self.window < self.n1 + 1 {
            return Err(Error::invalid("need 1 <= n0 <= n1 < window"));
        }
        if self.k == 0 || self.k >= self.window {
            return Err(Error::invalid("need 1 <= k < window"));
        }
        if self.permutations < 2 {
            return Err(Error::invalid("at least two permutations are needed for a variance"));
        }
        Ok(())
    }

    /// Older-group sizes `c` scanned, ascending.
    fn older_sizes(&self) -> core::ops::RangeInclusive<usize> {
        self.window - self.n1..=self.window - self.n0
    }
}

/// Directed kNN graph: entry `i` lists the `k` nearest other points of `i`,
/// ties resolved towards the smaller index.
pub fn knn_digraph(points: &PointSet, k: usize) -> Result<Vec<Vec<usize>>> {
    points
        .rows()
        .enumerate()
        .map(|(i, x)| Ok(k_nearest(x, points, k, Some(i))?.into_iter().map(|n| n.index).collect()))
        .collect()
}

/// Per-split crossing counts for ranks `rank[i]`: an edge crosses the split
/// with older size `c` iff `min(rank) < c <= max(rank)`. Output index is
/// `c - c_lo`.
fn crossing_counts(edges: &[(usize, usize)], rank: &[usize], c_lo: usize, c_hi: usize, diff: &mut Vec<i64>, out: &mut Vec<f64>) {
    let w = rank.len();
    diff.clear();
    diff.resize(w + 2, 0);
    for &(i, j) in edges {
        let (a, b) = if rank[i] < rank[j] { (rank[i], rank[j]) } else { (rank[j], rank[i]) };
        diff[a + 1] += 1;
        diff[b + 1] -= 1;
    }
    out.clear();
    let mut acc = 0i64;
    for (c, d) in diff.iter().enumerate().take(c_hi + 1) {
        acc += d;
        if c >= c_lo {
            out.push(acc as f64);
        }
    }
}

/// Monte Carlo mean and variance of `R` per candidate split.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// `max_c (mean_c − R_c)/sd_c`; splits with zero variance contribute 0.
pub fn max_standardized(observed: &[f64], moments: &PermutationMoments) -> f64 {
    observed
        .iter()
        .zip(moments.mean.iter().zip(&moments.variance))
        .map(|(&r, (&m, &v))| if v > 0.0 { (m - r) / libm::sqrt(v) } else { 0.0 })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Scan statistic for one window.
pub fn nn_online_statistic<R: RngCore + ?Sized>(window: &PointSet, params: &NnOnlineParams, rng: &mut R) -> Result<f64> {
    params.validate()?;
    if window.len() != params.window {
        return Err(Error::invalid(alloc::format!(
            "window holds {} points, expected {}",
            window.len(),
            params.window
        )));
    }
    let graph = knn_digraph(window, params.k)?;
    let edges: Vec<(usize, usize)> =
        graph.iter().enumerate().flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (i, j))).collect();
    let (c_lo, c_hi) = (*params.older_sizes().start(), *params.older_sizes().end());
    let splits = c_hi - c_lo + 1;

    let mut diff = Vec::new();
    let mut observed = Vec::with_capacity(splits);
    let identity: Vec<usize> = (0..params.window).collect();
    crossing_counts(&edges, &identity, c_lo, c_hi, &mut diff, &mut observed);

    let mut sum = vec![0.0; splits];
    let mut sum_sq = vec![0.0; splits];
    let mut rank = identity;
    let mut counts = Vec::with_capacity(splits);
    for _ in 0..params.permutations {
        rank.shuffle(rng);
        crossing_counts(&edges, &rank, c_lo, c_hi, &mut diff, &mut counts);
        for (s, &r) in counts.iter().enumerate() {
            sum[s] += r;
            sum_sq[s] += r * r;
        }
    }
    let p = params.permutations as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / p).collect();
    let variance = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq - p * m * m) / (p - 1.0)).max(0.0))
        .collect();
    Ok(max_standardized(&observed, &PermutationMoments { mean, variance }))
}

/// Sliding-window form of [`nn_online_statistic`] with its own seeded
/// permutation stream.
#[derive(Debug, Clone)]
pub struct NnOnline {
    params: NnOnlineParams,
    dim: usize,
    seed: u64,
    rng: ChaCha8Rng,
    buffer: VecDeque<Vec<f64>>,
}

impl NnOnline {
    pub fn new(dim: usize, params: NnOnlineParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(NnOnline {
            params,
            dim,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: VecDeque::with_capacity(params.window + 1),
        })
    }

    pub fn params(&self) -> NnOnlineParams {
        self.params
    }
}

impl SequentialDetector for NnOnline {
    fn warmup_len(&self) -> usize {
        self.params.window - 1
    }

    fn prime(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        self.buffer.push_back(x.to_vec());
        if self.buffer.len() > self.params.window {
            self.buffer.pop_front();
        }
        Ok(())
    }

    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        self.prime(x)?;
        if self.buffer.len() < self.params.window {
            return Ok(f64::NEG_INFINITY);
        }
        let mut window = PointSet::with_capacity(self.dim, self.params.window);
        for row in &self.buffer {
            window.push(row)?;
        }
        nn_online_statistic(&window, &self.params, &mut self.rng)
    }

    fn reset(&mut self) {
        self.buffer.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }
}
