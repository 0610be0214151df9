use crate::baseline::NominalBaseline;
use crate::detector::cusum_step;
use crate::error::{Error, Result};
use crate::sequential::SequentialDetector;

/// `g' = max(0, g + stat − d̄)`.
pub fn npcusum_update(g: f64, stat: f64, mean_baseline: f64) -> f64 {
    cusum_step(g, stat - mean_baseline)
}

/// Nonparametric CUSUM on the nominal summary statistic, with drift removed
/// by the mean of the nominal statistics.
#[derive(Debug, Clone)]
pub struct NpCusum<B> {
    baseline: B,
    mean_baseline: f64,
    g: f64,
}

impl<B: NominalBaseline> NpCusum<B> {
    pub fn new(baseline: B) -> Result<Self> {
        let stats = baseline.sorted_stats();
        if stats.is_empty() {
            return Err(Error::invalid("baseline has no nominal statistics"));
        }
        let mean_baseline = stats.iter().sum::<f64>() / stats.len() as f64;
        Ok(NpCusum { baseline, mean_baseline, g: 0.0 })
    }

    pub fn mean_baseline(&self) -> f64 {
        self.mean_baseline
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

impl<B: NominalBaseline> SequentialDetector for NpCusum<B> {
    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        let d = self.baseline.score(x)?;
        self.g = npcusum_update(self.g, d, self.mean_baseline);
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
    use alloc::vec;

    #[test]
    fn update_arithmetic() {
        let g = npcusum_update(0.0, 3.0, 2.0);
        assert_eq!(g, 1.0);
        assert_eq!(npcusum_update(g, 1.0, 2.0), 0.0);
    }

    #[test]
    fn constant_at_mean_stays_zero() {
        let mut d = NpCusum::new(StatisticBaseline::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(d.mean_baseline(), 2.0);
        for _ in 0..100 {
            assert_eq!(d.observe(&[2.0]).unwrap(), 0.0);
        }
        d.observe(&[5.0]).unwrap();
        assert_eq!(d.g(), 3.0);
        d.reset();
        assert_eq!(d.g(), 0.0);
    }
}
