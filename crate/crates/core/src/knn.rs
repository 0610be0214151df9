//! Exact brute-force k-nearest-neighbour search.
//!
//! High ambient dimensions defeat spatial trees, so every query is a linear
//! scan keeping the `k` best candidates. Ties in distance are broken by the
//! smaller point index, which makes results fully deterministic.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::points::{squared_distance, PointSet};

/// One neighbour: Euclidean distance and index into the searched set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub index: usize,
}

/// Keeps the `k` smallest `(squared distance, index)` pairs, sorted ascending.
struct KBest {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl KBest {
    fn new(k: usize) -> Self {
        KBest { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn offer(&mut self, d2: f64, index: usize) {
        // Indices arrive in increasing order, so an equal distance never
        // displaces an existing entry.
        if self.items.len() == self.k {
            match self.items.last() {
                Some(&(worst, _)) if d2 < worst => {
                    self.items.pop();
                }
                _ => return,
            }
        }
        let pos = self.items.partition_point(|&(d, i)| d < d2 || (d == d2 && i < index));
        self.items.insert(pos, (d2, index));
    }
}

/// The `k` nearest points of `set` to `x`, ascending by distance then index.
/// `exclude` skips one index of `set` (self-exclusion inside a window).
pub fn k_nearest(x: &[f64], set: &PointSet, k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
    check_dim(set.dim(), x.len())?;
    let available = set.len() - usize::from(exclude.is_some_and(|e| e < set.len()));
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > available {
        return Err(Error::invalid(alloc::format!(
            "k = {k} exceeds the {available} candidate points"
        )));
    }
    let mut best = KBest::new(k);
    for (i, row) in set.rows().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        best.offer(squared_distance(x, row), i);
    }
    Ok(best
        .items
        .into_iter()
        .map(|(d2, index)| Neighbor { distance: libm::sqrt(d2), index })
        .collect())
}

/// Sum of the Euclidean distances from `x` to its `k` nearest points in `s1`.
pub fn knn_sum_distance(x: &[f64], s1: &PointSet, k: usize) -> Result<f64> {
    let nn = k_nearest(x, s1, k, None)?;
    Ok(nn.iter().map(|n| n.distance).sum())
}

/// Distance from `x` to its `k`-th nearest point in `set`.
pub fn kth_neighbor_distance(x: &[f64], set: &PointSet, k: usize, exclude: Option<usize>) -> Result<f64> {
    let nn = k_nearest(x, set, k, exclude)?;
    Ok(nn[k - 1].distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Oracle: compute every distance, sort, sum the first k.
    fn brute_force(x: &[f64], s1: &PointSet, k: usize) -> f64 {
        let mut d: Vec<(f64, usize)> = s1
            .rows()
            .enumerate()
            .map(|(i, r)| (libm::sqrt(squared_distance(x, r)), i))
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        d[..k].iter().map(|p| p.0).sum()
    }

    fn scalar_set(v: &[f64]) -> PointSet {
        PointSet::from_flat(1, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_enumerated_scalar_case() {
        let s1 = scalar_set(&[0.0, 1.0, 3.0]);
        assert_eq!(knn_sum_distance(&[0.5], &s1, 2).unwrap(), 1.0);
    }

    #[test]
    fn member_point_has_zero_statistic() {
        let s1 = scalar_set(&[0.0, 1.0, 3.0]);
        assert_eq!(knn_sum_distance(&[3.0], &s1, 1).unwrap(), 0.0);
    }

    #[test]
    fn matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let s1 = PointSet::from_rows(&rows).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            assert_eq!(knn_sum_distance(&x, &s1, 4).unwrap(), brute_force(&x, &s1, 4));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let s = scalar_set(&[0.0, 1.0, 2.0]);
        let nn = k_nearest(&[1.0], &s, 1, Some(1)).unwrap();
        assert_eq!(nn[0].index, 0);
        let nn = k_nearest(&[1.0], &s, 2, None).unwrap();
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn duplicates_are_legal() {
        let s = scalar_set(&[2.0, 2.0, 2.0]);
        assert_eq!(knn_sum_distance(&[2.0], &s, 3).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = scalar_set(&[0.0, 1.0]);
        assert!(knn_sum_distance(&[0.0], &s, 3).unwrap_err().is_invalid_argument());
        assert!(knn_sum_distance(&[0.0], &s, 0).unwrap_err().is_invalid_argument());
        assert!(matches!(
            knn_sum_distance(&[0.0, 1.0], &s, 1),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(k_nearest(&[0.0], &s, 2, Some(0)).is_err());
    }
}
