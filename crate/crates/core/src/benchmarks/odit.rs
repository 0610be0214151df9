use crate::baseline::NominalBaseline;
use crate::error::{Error, Result};
use crate::sequential::SequentialDetector;

use super::npcusum_update;

/// `K = ⌈α N₂⌉` and the `K`-th largest nominal statistic `d_[K]`.
pub fn odit_threshold(sorted_stats: &[f64], alpha: f64) -> Result<(usize, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let n2 = sorted_stats.len();
    if n2 == 0 {
        return Err(Error::invalid("no nominal statistics"));
    }
    let k = libm::ceil(alpha * n2 as f64) as usize;
    if k == 0 || k > n2 {
        return Err(Error::invalid(alloc::format!("K = {k} is outside 1..={n2}")));
    }
    Ok((k, sorted_stats[n2 - k]))
}

/// CUSUM on `d_t − d_[K]`.
#[derive(Debug, Clone)]
pub struct Odit<B> {
    baseline: B,
    k: usize,
    threshold_distance: f64,
    g: f64,
}

impl<B: NominalBaseline> Odit<B> {
    pub fn new(baseline: B, alpha: f64) -> Result<Self> {
        let (k, threshold_distance) = odit_threshold(baseline.sorted_stats(), alpha)?;
        Ok(Odit { baseline, k, threshold_distance, g: 0.0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn threshold_distance(&self) -> f64 {
        self.threshold_distance
    }
}

impl<B: NominalBaseline> SequentialDetector for Odit<B> {
    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        let d = self.baseline.score(x)?;
        self.g = npcusum_update(self.g, d, self.threshold_distance);
        Ok(self.g)
    }

    fn reset(&mut self) {
        self.g = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::StatisticBaseline;
    use alloc::vec::Vec;

    #[test]
    fn ceiling_convention() {
        let nine: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(odit_threshold(&nine, 0.2).unwrap().0, 2);
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(odit_threshold(&ten, 0.2).unwrap(), (2, 9.0));
        assert_eq!(odit_threshold(&ten, 0.95).unwrap(), (10, 1.0));
        assert!(odit_threshold(&ten, 1.0).is_err());
        assert!(odit_threshold(&[], 0.2).is_err());
    }

    #[test]
    fn cusum_on_threshold_distance() {
        let b = StatisticBaseline::new((1..=10).map(f64::from).collect()).unwrap();
        let mut d = Odit::new(b, 0.2).unwrap();
        assert_eq!(d.threshold_distance(), 9.0);
        assert_eq!(d.observe(&[10.0]).unwrap(), 1.0);
        assert_eq!(d.observe(&[5.0]).unwrap(), 0.0);
    }
}
