//! Synthetic data sources: the linearized DC grid model with false data
//! injection, resampling pools, and change-point streams over them.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::points::PointSet;

fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Something that produces i.i.d. observations.
pub trait DataSource {
    fn dim(&self) -> usize;
    /// Overwrites `out` with one draw.
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>);

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut out);
        out
    }
}

impl<S: DataSource + ?Sized> DataSource for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        (**self).sample_into(rng, out)
    }
}

impl<S: DataSource + ?Sized> DataSource for Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        (**self).sample_into(rng, out)
    }
}

/// `x = Hφ + a + ω` with `ω ~ N(0, σ² I)` and a static state `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    m: usize,
    n: usize,
    /// Row-major `m × n` measurement matrix.
    h: Vec<f64>,
    phi: Vec<f64>,
    sigma2: f64,
    seed: Option<u64>,
    /// Cached `Hφ`.
    center: Vec<f64>,
}

impl GridModel {
    pub fn new(h: Vec<f64>, m: usize, n: usize, phi: Vec<f64>, sigma2: f64) -> Result<Self> {
        if m == 0 || n == 0 || h.len() != m * n {
            return Err(Error::invalid("measurement matrix shape does not match m x n"));
        }
        check_dim(n, phi.len())?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        let center = h.chunks_exact(n).map(|row| row.iter().zip(&phi).map(|(a, b)| a * b).sum()).collect();
        Ok(GridModel { m, n, h, phi, sigma2, seed: None, center })
    }

    /// Seeded stand-in for a real network: `H_ij ~ N(0, 1)/√n`, `φ_j ~ N(0, 0.1²)`.
    pub fn synthetic(m: usize, n: usize, sigma2: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / libm::sqrt(n as f64);
        let h = (0..m * n).map(|_| scale * normal(&mut rng)).collect();
        let phi = (0..n).map(|_| 0.1 * normal(&mut rng)).collect();
        let mut model = GridModel::new(h, m, n, phi, sigma2)?;
        model.seed = Some(seed);
        Ok(model)
    }

    pub fn measurements(&self) -> usize {
        self.m
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> &[f64] {
        &self.h
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Noise-free measurement `Hφ`.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn fill(&self, attack_mag: f64, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        let sigma = libm::sqrt(self.sigma2);
        out.clear();
        out.extend(self.center.iter().map(|c| {
            c + sigma * normal(rng)
        }));
        if attack_mag > 0.0 {
            for v in out.iter_mut() {
                *v += rng.random_range(-attack_mag..=attack_mag);
            }
        }
    }
}

/// One measurement vector; `attack_mag = 0` is nominal, otherwise each entry
/// gets an independent `U[−attack_mag, attack_mag]` injection, redrawn every call.
pub fn grid_sample(model: &GridModel, attack_mag: f64, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    if !(attack_mag >= 0.0 && attack_mag.is_finite()) {
        return Err(Error::invalid("attack magnitude must be finite and >= 0"));
    }
    let mut out = Vec::with_capacity(model.m);
    model.fill(attack_mag, rng, &mut out);
    Ok(out)
}

/// A grid model with a fixed attack magnitude, as a [`DataSource`].
#[derive(Debug, Clone)]
pub struct GridSource {
    model: Arc<GridModel>,
    attack_mag: f64,
}

impl GridSource {
    pub fn new(model: Arc<GridModel>, attack_mag: f64) -> Result<Self> {
        if !(attack_mag >= 0.0 && attack_mag.is_finite()) {
            return Err(Error::invalid("attack magnitude must be finite and >= 0"));
        }
        Ok(GridSource { model, attack_mag })
    }

    pub fn nominal(model: Arc<GridModel>) -> Self {
        GridSource { model, attack_mag: 0.0 }
    }
}

impl DataSource for GridSource {
    fn dim(&self) -> usize {
        self.model.m
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        self.model.fill(self.attack_mag, rng, out);
    }
}

/// Adds a constant offset to every draw of the inner source.
#[derive(Debug, Clone)]
pub struct MeanShift<S> {
    inner: S,
    offset: Vec<f64>,
}

impl<S: DataSource> MeanShift<S> {
    pub fn new(inner: S, offset: Vec<f64>) -> Result<Self> {
        check_dim(inner.dim(), offset.len())?;
        Ok(MeanShift { inner, offset })
    }

    /// Shifts every coordinate by `delta`.
    pub fn uniform(inner: S, delta: f64) -> Self {
        let offset = vec![delta; inner.dim()];
        MeanShift { inner, offset }
    }
}

impl<S: DataSource> DataSource for MeanShift<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        self.inner.sample_into(rng, out);
        for (v, o) in out.iter_mut().zip(&self.offset) {
            *v += o;
        }
    }
}

/// Uniform resampling, with replacement, from a fixed pool of points.
#[derive(Debug, Clone)]
pub struct PoolSource {
    pool: Arc<PointSet>,
}

impl PoolSource {
    pub fn new(pool: Arc<PointSet>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::invalid("sample pool is empty"));
        }
        Ok(PoolSource { pool })
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Index of the next draw; exposed for frequency checks.
    pub fn draw_index(&self, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.pool.len())
    }
}

impl DataSource for PoolSource {
    fn dim(&self) -> usize {
        self.pool.dim()
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        let i = self.draw_index(rng);
        out.clear();
        out.extend_from_slice(self.pool.row(i));
    }
}

/// Pre-change source before `tau`, post-change source from `tau` on.
#[derive(Debug, Clone)]
pub struct StreamSpec<P, Q> {
    /// 1-based change point; `None` means no change.
    pub tau: Option<u64>,
    pub pre: P,
    pub post: Q,
    /// Maximum number of observations.
    pub horizon: u64,
}

impl<P: DataSource, Q: DataSource> StreamSpec<P, Q> {
    pub fn new(tau: Option<u64>, pre: P, post: Q, horizon: u64) -> Result<Self> {
        if tau == Some(0) {
            return Err(Error::invalid("change point must be >= 1"));
        }
        check_dim(pre.dim(), post.dim())?;
        Ok(StreamSpec { tau, pre, post, horizon })
    }

    /// Whether step `t` (1-based) is drawn from the post-change source.
    pub fn is_post_change(&self, t: u64) -> bool {
        self.tau.is_some_and(|tau| t >= tau)
    }

    /// The observation sequence under `rng`.
    pub fn stream<R: RngCore>(&self, rng: R) -> ChangeStream<'_, P, Q, R> {
        ChangeStream { spec: self, rng, t: 0 }
    }
}

/// Free-function form of [`StreamSpec::stream`].
pub fn pool_stream<P: DataSource, Q: DataSource, R: RngCore>(
    spec: &StreamSpec<P, Q>,
    rng: R,
) -> ChangeStream<'_, P, Q, R> {
    spec.stream(rng)
}

pub struct ChangeStream<'a, P, Q, R> {
    spec: &'a StreamSpec<P, Q>,
    rng: R,
    t: u64,
}

impl<P: DataSource, Q: DataSource, R: RngCore> Iterator for ChangeStream<'_, P, Q, R> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.t >= self.spec.horizon {
            return None;
        }
        self.t += 1;
        Some(if self.spec.is_post_change(self.t) {
            self.spec.post.sample(&mut self.rng)
        } else {
            self.spec.pre.sample(&mut self.rng)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::trial_rng;

    #[test]
    fn noiseless_limit_returns_center() {
        let model = GridModel::synthetic(8, 5, 1e-300, 1).unwrap();
        let mut rng = trial_rng(0, 0);
        let x = grid_sample(&model, 0.0, &mut rng).unwrap();
        assert_eq!(x, model.center());
    }

    #[test]
    fn explicit_model_center() {
        let m = GridModel::new(vec![1.0, 2.0, 0.0, 1.0], 2, 2, vec![3.0, 4.0], 0.01).unwrap();
        assert_eq!(m.center(), &[11.0, 4.0]);
        assert!(GridModel::new(vec![1.0; 3], 2, 2, vec![0.0; 2], 0.01).is_err());
        assert!(GridModel::new(vec![1.0; 4], 2, 2, vec![0.0; 2], 0.0).is_err());
        assert!(GridModel::new(vec![1.0; 4], 2, 2, vec![0.0; 3], 0.1).is_err());
    }

    #[test]
    fn nominal_noise_moments() {
        let model = GridModel::synthetic(6, 4, 0.01, 3).unwrap();
        let mut rng = trial_rng(1, 0);
        let n = 100_000;
        let mut sum = [0.0; 6];
        let mut sq = [0.0; 6];
        for _ in 0..n {
            let x = grid_sample(&model, 0.0, &mut rng).unwrap();
            for i in 0..6 {
                let d = x[i] - model.center()[i];
                sum[i] += d;
                sq[i] += d * d;
            }
        }
        let se = 3.0 * libm::sqrt(0.01 / n as f64);
        for i in 0..6 {
            assert!((sum[i] / n as f64).abs() < se);
            assert!((sq[i] / n as f64 / 0.01 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn attack_adds_uniform_variance() {
        let model = GridModel::synthetic(4, 3, 1e-300, 3).unwrap();
        let mut rng = trial_rng(2, 0);
        let n = 100_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = grid_sample(&model, 0.14, &mut rng).unwrap();
            let d = x[0] - model.center()[0];
            assert!(d.abs() <= 0.14 + 1e-12);
            sq += d * d;
        }
        let var = sq / n as f64;
        assert!((var / (0.14 * 0.14 / 3.0) - 1.0).abs() < 0.1, "{var}");
        assert!(grid_sample(&model, -1.0, &mut rng).is_err());
    }

    #[test]
    fn pool_stream_switches_at_tau() {
        let pre = PoolSource::new(Arc::new(PointSet::from_flat(1, vec![0.0]).unwrap())).unwrap();
        let post = PoolSource::new(Arc::new(PointSet::from_flat(1, vec![1.0, 2.0]).unwrap())).unwrap();
        let spec = StreamSpec::new(Some(4), pre.clone(), post.clone(), 10).unwrap();
        let xs: Vec<Vec<f64>> = pool_stream(&spec, trial_rng(0, 0)).collect();
        assert_eq!(xs.len(), 10);
        assert!(xs[..3].iter().all(|x| x[0] == 0.0));
        assert!(xs[3..].iter().all(|x| x[0] >= 1.0));

        let never = StreamSpec::new(None, pre.clone(), post.clone(), 20).unwrap();
        assert!(never.stream(trial_rng(0, 1)).all(|x| x[0] == 0.0));
        let always = StreamSpec::new(Some(1), pre, post, 20).unwrap();
        assert!(always.stream(trial_rng(0, 2)).all(|x| x[0] >= 1.0));
    }

    #[test]
    fn pool_stream_is_seed_deterministic() {
        let pool = PoolSource::new(Arc::new(PointSet::from_flat(1, (0..10).map(f64::from).collect()).unwrap())).unwrap();
        let spec = StreamSpec::new(None, pool.clone(), pool, 50).unwrap();
        let a: Vec<_> = spec.stream(trial_rng(5, 5)).collect();
        let b: Vec<_> = spec.stream(trial_rng(5, 5)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn pool_draws_are_uniform() {
        let pool = PoolSource::new(Arc::new(PointSet::from_flat(1, (0..10).map(f64::from).collect()).unwrap())).unwrap();
        let mut rng = trial_rng(8, 0);
        let mut counts = [0u32; 10];
        let n = 10_000;
        for _ in 0..n {
            counts[pool.draw_index(&mut rng)] += 1;
        }
        let expected = n as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-squared with 9 degrees of freedom.
        assert!(chi2 < 21.666, "{chi2}");
    }

    #[test]
    fn invalid_specs() {
        assert!(PoolSource::new(Arc::new(PointSet::new(2))).is_err());
        let a = PoolSource::new(Arc::new(PointSet::from_flat(1, vec![0.0]).unwrap())).unwrap();
        let b = PoolSource::new(Arc::new(PointSet::from_flat(2, vec![0.0, 1.0]).unwrap())).unwrap();
        assert!(StreamSpec::new(Some(0), a.clone(), a.clone(), 5).is_err());
        assert!(StreamSpec::new(Some(1), a, b, 5).is_err());
    }

    #[test]
    fn mean_shift_offsets_draws() {
        let pool = PoolSource::new(Arc::new(PointSet::from_flat(2, vec![1.0, 2.0]).unwrap())).unwrap();
        let shifted = MeanShift::uniform(pool, 0.5);
        assert_eq!(shifted.sample(&mut trial_rng(0, 0)), vec![1.5, 2.5]);
    }
}
