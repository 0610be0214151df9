//! The scoring contract shared by every nominal baseline.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::gem::{validate_sorted_stats, GemBaseline};
use crate::pca::PcaBaseline;
use crate::points::PointSet;

/// A nominal baseline: an ascending sample of nominal summary statistics and
/// a way to compute the same statistic for a new observation.
pub trait NominalBaseline {
    /// Dimension of the observations accepted by [`score`](Self::score).
    fn dim(&self) -> usize;
    fn sorted_stats(&self) -> &[f64];
    fn score(&self, x: &[f64]) -> Result<f64>;
}

impl NominalBaseline for GemBaseline {
    fn dim(&self) -> usize {
        GemBaseline::dim(self)
    }
    fn sorted_stats(&self) -> &[f64] {
        GemBaseline::sorted_stats(self)
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        GemBaseline::score(self, x)
    }
}

impl NominalBaseline for PcaBaseline {
    fn dim(&self) -> usize {
        PcaBaseline::dim(self)
    }
    fn sorted_stats(&self) -> &[f64] {
        PcaBaseline::sorted_stats(self)
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        PcaBaseline::score(self, x)
    }
}

impl<T: NominalBaseline + ?Sized> NominalBaseline for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sorted_stats(&self) -> &[f64] {
        (**self).sorted_stats()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        (**self).score(x)
    }
}

impl<T: NominalBaseline + ?Sized> NominalBaseline for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sorted_stats(&self) -> &[f64] {
        (**self).sorted_stats()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        (**self).score(x)
    }
}

/// Baseline over precomputed scalar statistics: observations are
/// one-element slices holding the statistic itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticBaseline {
    sorted_stats: Vec<f64>,
}

impl StatisticBaseline {
    /// Sorts `stats`; values must be finite and nonnegative.
    pub fn new(mut stats: Vec<f64>) -> Result<Self> {
        stats.sort_by(f64::total_cmp);
        validate_sorted_stats(&stats)?;
        Ok(StatisticBaseline { sorted_stats: stats })
    }
}

impl NominalBaseline for StatisticBaseline {
    fn dim(&self) -> usize {
        1
    }
    fn sorted_stats(&self) -> &[f64] {
        &self.sorted_stats
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(1, x.len())?;
        Ok(x[0])
    }
}

/// GEM statistics computed in the principal subspace: observations are
/// projected with `Vᵀx` before the kNN search.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGemBaseline {
    pca: PcaBaseline,
    gem: GemBaseline,
}

impl ProjectedGemBaseline {
    /// Fits PCA on `s1` (residual calibration on `s2`), then builds the GEM
    /// baseline from the projections of the same split.
    pub fn fit(s1: &PointSet, s2: &PointSet, rule: crate::pca::RankRule, k: usize, seed: u64) -> Result<Self> {
        let pca = PcaBaseline::fit(s1, s2, rule)?;
        let r = pca.rank();
        let ps1 = s1.map_rows(r, |x| pca.project(x))?;
        let ps2 = s2.map_rows(r, |x| pca.project(x))?;
        let gem = GemBaseline::from_sets(ps1, &ps2, k, seed)?;
        Ok(ProjectedGemBaseline { pca, gem })
    }

    pub fn from_parts(pca: PcaBaseline, gem: GemBaseline) -> Result<Self> {
        check_dim(pca.rank(), gem.dim())?;
        Ok(ProjectedGemBaseline { pca, gem })
    }

    pub fn pca(&self) -> &PcaBaseline {
        &self.pca
    }

    pub fn gem(&self) -> &GemBaseline {
        &self.gem
    }
}

impl NominalBaseline for ProjectedGemBaseline {
    fn dim(&self) -> usize {
        self.pca.dim()
    }
    fn sorted_stats(&self) -> &[f64] {
        self.gem.sorted_stats()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        let y = self.pca.project(x)?;
        self.gem.score(&y)
    }
}
