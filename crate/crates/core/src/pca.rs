//! Principal-subspace baseline with residual-norm summary statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::symmetric_eigen;
use crate::points::{euclidean_norm, PointSet};

/// How the retained dimension `r` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Smallest `r` whose retained variance fraction reaches the value.
    MinVariance(f64),
    /// Fixed `r`, e.g. picked by inspecting a scree plot.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBaseline {
    mean: Vec<f64>,
    /// Row-major `p × r`, orthonormal columns.
    basis: Vec<f64>,
    eigenvalues: Vec<f64>,
    r: usize,
    gamma_achieved: f64,
    sorted_stats: Vec<f64>,
}

/// Smallest `r` with `Σ_{j≤r} λ_j / Σ_j λ_j ≥ gamma_min`, and the fraction reached.
///
/// `eigenvalues` must be sorted in descending order. A zero spectrum retains
/// everything with `r = 1`.
pub fn select_rank(eigenvalues: &[f64], gamma_min: f64) -> Result<(usize, f64)> {
    if !(gamma_min > 0.0 && gamma_min <= 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1]"));
    }
    if eigenvalues.is_empty() {
        return Err(Error::invalid("no eigenvalues"));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Ok((1, 1.0));
    }
    let mut acc = 0.0;
    for (j, l) in eigenvalues.iter().enumerate() {
        acc += l;
        let frac = acc / total;
        if frac >= gamma_min {
            return Ok((j + 1, frac.min(1.0)));
        }
    }
    // Roundoff can leave the full sum a hair under gamma_min = 1.
    Ok((eigenvalues.len(), 1.0))
}

fn variance_fraction(eigenvalues: &[f64], r: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        1.0
    } else {
        (eigenvalues[..r].iter().sum::<f64>() / total).min(1.0)
    }
}

/// Sample mean and `1/N` covariance (row-major `p × p`).
pub fn mean_and_covariance(s1: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let p = s1.dim();
    let n = s1.len() as f64;
    let mut mean = vec![0.0; p];
    for x in s1.rows() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; p * p];
    let mut centered = vec![0.0; p];
    for x in s1.rows() {
        for ((c, v), m) in centered.iter_mut().zip(x).zip(&mean) {
            *c = v - m;
        }
        for i in 0..p {
            let ci = centered[i];
            let row = &mut cov[i * p..i * p + i + 1];
            for (slot, cj) in row.iter_mut().zip(&centered) {
                *slot += ci * cj;
            }
        }
    }
    for i in 0..p {
        for j in 0..=i {
            let v = cov[i * p + j] / n;
            cov[i * p + j] = v;
            cov[j * p + i] = v;
        }
    }
    (mean, cov)
}

impl PcaBaseline {
    /// Fits the principal subspace on `s1` and calibrates residual norms on `s2`.
    pub fn fit(s1: &PointSet, s2: &PointSet, rule: RankRule) -> Result<Self> {
        if s1.len() < 2 {
            return Err(Error::invalid("S1 needs at least two points"));
        }
        if s2.is_empty() {
            return Err(Error::invalid("S2 is empty"));
        }
        check_dim(s1.dim(), s2.dim())?;
        let p = s1.dim();
        let (mean, cov) = mean_and_covariance(s1);
        let eig = symmetric_eigen(&cov, p)?;
        let eigenvalues: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();

        let (r, gamma_achieved) = match rule {
            RankRule::MinVariance(g) => select_rank(&eigenvalues, g)?,
            RankRule::Fixed(r) => {
                if r == 0 || r > p {
                    return Err(Error::invalid(alloc::format!("r = {r} must satisfy 1 <= r <= {p}")));
                }
                (r, variance_fraction(&eigenvalues, r))
            }
        };

        let mut basis = vec![0.0; p * r];
        for j in 0..r {
            let mut v = eig.vector(j);
            // Sign convention: the largest-magnitude entry is positive.
            let mut pivot = 0;
            for i in 1..p {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            for i in 0..p {
                basis[i * r + j] = v[i];
            }
        }

        let mut baseline = PcaBaseline { mean, basis, eigenvalues, r, gamma_achieved, sorted_stats: Vec::new() };
        let mut stats = s2.rows().map(|x| baseline.score(x)).collect::<Result<Vec<_>>>()?;
        stats.sort_by(f64::total_cmp);
        baseline.sorted_stats = stats;
        Ok(baseline)
    }

    /// Reassembles a persisted baseline, checking shapes and sortedness.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Vec<f64>,
        eigenvalues: Vec<f64>,
        r: usize,
        sorted_stats: Vec<f64>,
    ) -> Result<Self> {
        let p = mean.len();
        if p == 0 || r == 0 || r > p || basis.len() != p * r || eigenvalues.len() != p {
            return Err(Error::invalid("inconsistent PCA baseline shapes"));
        }
        crate::gem::validate_sorted_stats(&sorted_stats)?;
        let gamma_achieved = variance_fraction(&eigenvalues, r);
        Ok(PcaBaseline { mean, basis, eigenvalues, r, gamma_achieved, sorted_stats })
    }

    /// Coefficients `Vᵀ(x − x̄)` and the residual `(I − VVᵀ)(x − x̄)`.
    fn decompose(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.dim(), x.len())?;
        let r = self.r;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut coef = vec![0.0; r];
        for (row, c) in self.basis.chunks_exact(r).zip(&centered) {
            for (cj, vij) in coef.iter_mut().zip(row) {
                *cj += vij * c;
            }
        }
        let mut resid = centered;
        for (row, ri) in self.basis.chunks_exact(r).zip(resid.iter_mut()) {
            let proj: f64 = row.iter().zip(&coef).map(|(v, c)| v * c).sum();
            *ri -= proj;
        }
        Ok((coef, resid))
    }

    /// Residual vector and its Euclidean norm.
    pub fn residual(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (_, resid) = self.decompose(x)?;
        let norm = euclidean_norm(&resid);
        Ok((resid, norm))
    }

    /// Online summary statistic: the residual norm.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.residual(x).map(|(_, n)| n)
    }

    /// `Vᵀx`, without centering.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.r];
        for (row, xi) in self.basis.chunks_exact(self.r).zip(x) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * xi;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `p × r` basis matrix.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn basis_column(&self, j: usize) -> Vec<f64> {
        self.basis.chunks_exact(self.r).map(|row| row[j]).collect()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gamma_achieved(&self) -> f64 {
        self.gamma_achieved
    }

    pub fn sorted_stats(&self) -> &[f64] {
        &self.sorted_stats
    }
}

pub fn fit_pca_baseline(s1: &PointSet, s2: &PointSet, gamma_min: f64) -> Result<PcaBaseline> {
    PcaBaseline::fit(s1, s2, RankRule::MinVariance(gamma_min))
}

pub fn residual(baseline: &PcaBaseline, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    baseline.residual(x)
}

pub fn pca_score(baseline: &PcaBaseline, x: &[f64]) -> Result<f64> {
    baseline.score(x)
}

pub fn project(baseline: &PcaBaseline, x: &[f64]) -> Result<Vec<f64>> {
    baseline.project(x)
}
