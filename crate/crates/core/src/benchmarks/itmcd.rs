use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::knn::kth_neighbor_distance;
use crate::points::PointSet;
use crate::sequential::SequentialDetector;

use super::MIN_DISTANCE;

/// kNN estimate of `KL(P_m ‖ P_n)` from samples of each distribution:
/// `log(w_n/(w_m−1)) + (p/w_m) Σ_i log(e_{m,n}(i)/e_{m,m}(i))`, where
/// `e_{m,n}(i)` is the distance from the `i`-th point of `window_m` to its
/// `k`-th neighbour in `window_n`, and `e_{m,m}(i)` excludes the point itself.
pub fn itmcd_kl_estimate(window_m: &PointSet, window_n: &PointSet, k: usize) -> Result<f64> {
    check_dim(window_m.dim(), window_n.dim())?;
    let (wm, wn) = (window_m.len(), window_n.len());
    if k == 0 || wm < k + 1 || wn < k {
        return Err(Error::invalid(alloc::format!(
            "windows of sizes {wm} and {wn} are too small for k = {k}"
        )));
    }
    let p = window_m.dim() as f64;
    let mut sum = 0.0;
    for (i, x) in window_m.rows().enumerate() {
        let cross = kth_neighbor_distance(x, window_n, k, None)?.max(MIN_DISTANCE);
        let own = kth_neighbor_distance(x, window_m, k, Some(i))?.max(MIN_DISTANCE);
        sum += libm::log(cross / own);
    }
    Ok(libm::log(wn as f64 / (wm as f64 - 1.0)) + p / wm as f64 * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItmcdParams {
    pub k: usize,
    /// Recent window.
    pub w1: usize,
    /// Reference window preceding the recent one.
    pub w2: usize,
}

impl Default for ItmcdParams {
    fn default() -> Self {
        ItmcdParams { k: 4, w1: 20, w2: 100 }
    }
}

/// Symmetrized KL estimate between the last `w1` observations and the `w2`
/// before them.
#[derive(Debug, Clone)]
pub struct Itmcd {
    params: ItmcdParams,
    dim: usize,
    buffer: VecDeque<Vec<f64>>,
}

impl Itmcd {
    pub fn new(dim: usize, params: ItmcdParams) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if params.k == 0 || params.w1 < params.k + 1 || params.w2 < params.k + 1 {
            return Err(Error::invalid("each window needs at least k + 1 points"));
        }
        Ok(Itmcd { params, dim, buffer: VecDeque::with_capacity(params.w1 + params.w2 + 1) })
    }

    pub fn params(&self) -> ItmcdParams {
        self.params
    }

    fn windows(&self) -> (PointSet, PointSet) {
        let mut older = PointSet::with_capacity(self.dim, self.params.w2);
        let mut recent = PointSet::with_capacity(self.dim, self.params.w1);
        for (i, x) in self.buffer.iter().enumerate() {
            let target = if i < self.params.w2 { &mut older } else { &mut recent };
            target.push(x).expect("dimension checked on entry");
        }
        (recent, older)
    }
}

impl SequentialDetector for Itmcd {
    fn warmup_len(&self) -> usize {
        self.params.w1 + self.params.w2 - 1
    }

    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        self.buffer.push_back(x.to_vec());
        if self.buffer.len() > self.params.w1 + self.params.w2 {
            self.buffer.pop_front();
        }
        if self.buffer.len() < self.params.w1 + self.params.w2 {
            return Ok(f64::NEG_INFINITY);
        }
        let (recent, older) = self.windows();
        let k = self.params.k;
        Ok(itmcd_kl_estimate(&recent, &older, k)? + itmcd_kl_estimate(&older, &recent, k)?)
    }

    fn reset(&mut self) {
        self.buffer.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn equal_neighbour_distances_leave_only_the_size_term() {
        // Two parallel rows of points at unit spacing, one unit apart.
        let m = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]).unwrap();
        let n = PointSet::from_rows(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]).unwrap();
        let v = itmcd_kl_estimate(&m, &n, 1).unwrap();
        assert!((v - libm::log(4.0 / 3.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn duplicates_are_clamped() {
        let m = PointSet::from_flat(1, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(itmcd_kl_estimate(&m, &m.clone(), 1).unwrap().is_finite());
    }

    #[test]
    fn detector_waits_for_full_windows() {
        let params = ItmcdParams { k: 1, w1: 3, w2: 4 };
        let mut d = Itmcd::new(1, params).unwrap();
        assert_eq!(d.warmup_len(), 6);
        for i in 0..6 {
            assert_eq!(d.observe(&[i as f64]).unwrap(), f64::NEG_INFINITY);
        }
        assert!(d.observe(&[6.0]).unwrap().is_finite());
        assert!(d.observe(&[1.0, 2.0]).is_err());
        d.reset();
        assert_eq!(d.observe(&[0.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn swap_symmetry_for_equal_windows() {
        let a = PointSet::from_flat(1, vec![0.0, 1.5, 2.0, 4.5, 7.0]).unwrap();
        let b = PointSet::from_flat(1, vec![0.3, 1.0, 3.0, 3.5, 9.0]).unwrap();
        let ab = itmcd_kl_estimate(&a, &b, 2).unwrap() + itmcd_kl_estimate(&b, &a, 2).unwrap();
        let ba = itmcd_kl_estimate(&b, &a, 2).unwrap() + itmcd_kl_estimate(&a, &b, 2).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn rejects_small_windows() {
        let a = PointSet::from_flat(1, vec![0.0, 1.0]).unwrap();
        assert!(itmcd_kl_estimate(&a, &a, 2).is_err());
        assert!(Itmcd::new(2, ItmcdParams { k: 4, w1: 4, w2: 10 }).is_err());
    }
}
