use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;
use crate::sequential::SequentialDetector;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { coord: usize, threshold: f64, left: usize, right: usize },
    Leaf(usize),
}

/// Axis-aligned partition of the observation space into `K` bins that each
/// hold about `N/K` of the training points. Outer bins are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantTreePartition {
    dim: usize,
    nodes: Vec<Node>,
    probabilities: Vec<f64>,
}

/// Builds the partition by recursive empirical-quantile splits, each on a
/// coordinate drawn uniformly at random. A node responsible for `b` bins
/// sends `⌊b/2⌋` bins and the matching share of its points to the lower side.
pub fn quanttree_build(nominal: &PointSet, k: usize, seed: u64) -> Result<QuantTreePartition> {
    if k == 0 {
        return Err(Error::invalid("number of bins must be positive"));
    }
    if nominal.len() < k {
        return Err(Error::invalid(alloc::format!(
            "{} training points cannot fill {k} bins",
            nominal.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(2 * k);
    let mut indices: Vec<usize> = (0..nominal.len()).collect();
    build_node(nominal, &mut indices, k, 0, &mut rng, &mut nodes);
    Ok(QuantTreePartition { dim: nominal.dim(), nodes, probabilities: vec![1.0 / k as f64; k] })
}

fn build_node(data: &PointSet, idx: &mut [usize], bins: usize, first_bin: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if bins == 1 {
        nodes.push(Node::Leaf(first_bin));
        return me;
    }
    nodes.push(Node::Leaf(usize::MAX));
    let coord = rng.random_range(0..data.dim());
    idx.sort_by(|&a, &b| data.row(a)[coord].total_cmp(&data.row(b)[coord]).then(a.cmp(&b)));
    let left_bins = bins / 2;
    let n = idx.len();
    let n_left = (n * left_bins + bins / 2) / bins;
    let threshold = 0.5 * (data.row(idx[n_left - 1])[coord] + data.row(idx[n_left])[coord]);
    let (lo, hi) = idx.split_at_mut(n_left);
    let left = build_node(data, lo, left_bins, first_bin, rng, nodes);
    let right = build_node(data, hi, bins - left_bins, first_bin + left_bins, rng, nodes);
    nodes[me] = Node::Split { coord, threshold, left, right };
    me
}

impl QuantTreePartition {
    pub fn bins(&self) -> usize {
        self.probabilities.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Target bin probabilities `π_i = 1/K`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn bin_of(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(bin) => return Ok(bin),
                Node::Split { coord, threshold, left, right } => {
                    at = if x[coord] < threshold { left } else { right };
                }
            }
        }
    }

    /// Histogram of `points` over the bins.
    pub fn counts(&self, points: &PointSet) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.bins()];
        for x in points.rows() {
            counts[self.bin_of(x)?] += 1;
        }
        Ok(counts)
    }
}

/// Pearson statistic `Σ (y_i − Wπ_i)² / (Wπ_i)`.
pub fn chi_squared_statistic(counts: &[u64], probabilities: &[f64], w: u64) -> Result<f64> {
    check_dim(probabilities.len(), counts.len())?;
    if counts.iter().sum::<u64>() != w {
        return Err(Error::invalid("bin counts do not sum to the window size"));
    }
    if w == 0 || probabilities.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::invalid("window and probabilities must be positive"));
    }
    let w = w as f64;
    Ok(counts
        .iter()
        .zip(probabilities)
        .map(|(&y, &p)| {
            let e = w * p;
            (y as f64 - e) * (y as f64 - e) / e
        })
        .sum())
}

/// Chi-squared statistic over the bin counts of the last `W` observations.
#[derive(Debug, Clone)]
pub struct SlidingChiSquared {
    partition: QuantTreePartition,
    window: usize,
    recent: VecDeque<usize>,
    counts: Vec<u64>,
}

impl SlidingChiSquared {
    pub fn new(partition: QuantTreePartition, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window must be positive"));
        }
        let k = partition.bins();
        Ok(SlidingChiSquared { partition, window, recent: VecDeque::with_capacity(window + 1), counts: vec![0; k] })
    }

    pub fn partition(&self) -> &QuantTreePartition {
        &self.partition
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl SequentialDetector for SlidingChiSquared {
    fn warmup_len(&self) -> usize {
        self.window - 1
    }

    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        let bin = self.partition.bin_of(x)?;
        self.recent.push_back(bin);
        self.counts[bin] += 1;
        if self.recent.len() > self.window {
            let old = self.recent.pop_front().expect("nonempty");
            self.counts[old] -= 1;
        }
        if self.recent.len() < self.window {
            return Ok(f64::NEG_INFINITY);
        }
        chi_squared_statistic(&self.counts, self.partition.probabilities(), self.window as u64)
    }

    fn reset(&mut self) {
        self.recent.clear();
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_median_split() {
        let data = PointSet::from_flat(1, vec![5.0, 1.0, 3.0, 2.0, 4.0, 6.0]).unwrap();
        let part = quanttree_build(&data, 2, 0).unwrap();
        assert_eq!(part.counts(&data).unwrap(), vec![3, 3]);
        assert_eq!(part.bin_of(&[3.4]).unwrap(), 0);
        assert_eq!(part.bin_of(&[3.6]).unwrap(), 1);
    }

    #[test]
    fn uneven_bin_counts_still_balanced() {
        let data = PointSet::from_flat(2, (0..60).map(|i| ((i * 37) % 61) as f64).collect()).unwrap();
        let part = quanttree_build(&data, 3, 4).unwrap();
        assert_eq!(part.bins(), 3);
        assert_eq!(part.counts(&data).unwrap(), vec![10, 10, 10]);
    }

    #[test]
    fn chi_squared_arithmetic() {
        assert_eq!(chi_squared_statistic(&[16; 16], &[1.0 / 16.0; 16], 256).unwrap(), 0.0);
        assert!((chi_squared_statistic(&[60, 40], &[0.5, 0.5], 100).unwrap() - 4.0).abs() < 1e-12);
        assert!(chi_squared_statistic(&[60, 41], &[0.5, 0.5], 100).is_err());
    }

    #[test]
    fn sliding_window_counts() {
        let data = PointSet::from_flat(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let part = quanttree_build(&data, 2, 0).unwrap();
        let mut d = SlidingChiSquared::new(part, 4).unwrap();
        assert_eq!(d.warmup_len(), 3);
        for x in [0.0, 0.0, 3.0] {
            assert_eq!(d.observe(&[x]).unwrap(), f64::NEG_INFINITY);
        }
        assert_eq!(d.observe(&[3.0]).unwrap(), 0.0);
        // Window is now {0, 3, 3, 3}.
        assert!((d.observe(&[3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(d.counts(), &[1, 3]);
    }

    #[test]
    fn rejects_too_few_points() {
        let data = PointSet::from_flat(1, vec![0.0, 1.0]).unwrap();
        assert!(quanttree_build(&data, 3, 0).is_err());
        assert!(quanttree_build(&data, 0, 0).is_err());
    }
}
