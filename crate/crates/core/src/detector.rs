//! The CUSUM-like detector driven by empirical tail probabilities.
//!
//! Each observation is reduced to a summary statistic, compared against the
//! sorted nominal statistics to get an empirical p-value `p̂`, turned into
//! evidence `ŝ = ln(α / p̂)` and accumulated as `g_t = max(0, g_{t-1} + ŝ_t)`.
//! An alarm is raised at the first `t` with `g_t ≥ h`.

use alloc::vec::Vec;

use crate::baseline::NominalBaseline;
use crate::error::{Error, Result};
use crate::sequential::SequentialDetector;

/// Default significance level for outliers.
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorConfig {
    pub alpha: f64,
    pub h: f64,
    /// Replace a zero p-value by `1/N₂` so one extreme outlier cannot push
    /// the statistic to infinity.
    pub floor_zero_pvalue: bool,
}

impl DetectorConfig {
    pub fn new(alpha: f64, h: f64) -> Result<Self> {
        let c = DetectorConfig { alpha, h, floor_zero_pvalue: true };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(alloc::format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        // h = 0 is accepted as the degenerate "alarm immediately" boundary.
        if !(self.h >= 0.0) || self.h.is_infinite() {
            return Err(Error::invalid(alloc::format!("threshold h = {} must be finite and >= 0", self.h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorState {
    pub g: f64,
    pub t: u64,
    pub stopped_at: Option<u64>,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped_at.is_some()
    }

    /// One recursion step. Fails once the detector has stopped.
    pub fn update(self, s_hat: f64, config: &DetectorConfig) -> Result<Self> {
        update(self, s_hat, config)
    }
}

/// Fraction of nominal statistics strictly greater than `stat`.
///
/// With `floor_zero`, an empty upper tail yields `1/N₂` instead of 0.
pub fn tail_probability(sorted_stats: &[f64], stat: f64, floor_zero: bool) -> Result<f64> {
    let n = sorted_stats.len();
    if n == 0 {
        return Err(Error::invalid("empty nominal statistics"));
    }
    if stat.is_nan() {
        return Err(Error::invalid("summary statistic is NaN"));
    }
    let exceed = n - sorted_stats.partition_point(|&d| d <= stat);
    if exceed == 0 && floor_zero {
        return Ok(1.0 / n as f64);
    }
    Ok(exceed as f64 / n as f64)
}

/// `ln(α / p̂)`: positive for outliers at level α.
pub fn evidence(p_hat: f64, alpha: f64) -> Result<f64> {
    if !(p_hat > 0.0 && p_hat <= 1.0) {
        return Err(Error::invalid(alloc::format!("p-value {p_hat} outside (0, 1]")));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    Ok(libm::log(alpha / p_hat))
}

#[inline]
pub(crate) fn cusum_step(g: f64, increment: f64) -> f64 {
    let next = g + increment;
    if next > 0.0 {
        next
    } else {
        0.0
    }
}

pub fn update(state: DetectorState, s_hat: f64, config: &DetectorConfig) -> Result<DetectorState> {
    if let Some(t) = state.stopped_at {
        return Err(Error::IllegalState(alloc::format!("detector already stopped at t = {t}")));
    }
    let g = cusum_step(state.g, s_hat);
    let t = state.t + 1;
    Ok(DetectorState { g, t, stopped_at: (g >= config.h).then_some(t) })
}

/// Everything computed in one online step; also the trace row layout.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub t: u64,
    pub score: f64,
    pub p_hat: f64,
    pub s_hat: f64,
    pub g: f64,
    pub alarm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// First `t` with `g_t ≥ h`.
    pub stopped_at: Option<u64>,
    /// Observations consumed.
    pub steps: u64,
    pub trajectory: Option<Vec<f64>>,
}

/// Streaming form of the detector over a shared baseline.
#[derive(Debug, Clone)]
pub struct TailCusum<B> {
    baseline: B,
    config: DetectorConfig,
    state: DetectorState,
}

impl<B: NominalBaseline> TailCusum<B> {
    pub fn new(baseline: B, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        if baseline.sorted_stats().is_empty() {
            return Err(Error::invalid("baseline has no nominal statistics"));
        }
        Ok(TailCusum { baseline, config, state: DetectorState::new() })
    }

    /// Resumes from a checkpointed state.
    pub fn with_state(baseline: B, config: DetectorConfig, state: DetectorState) -> Result<Self> {
        let mut d = Self::new(baseline, config)?;
        d.state = state;
        Ok(d)
    }

    pub fn state(&self) -> DetectorState {
        self.state
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn baseline(&self) -> &B {
        &self.baseline
    }

    /// Score, p-value and evidence for one observation, without touching state.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, f64, f64)> {
        let score = self.baseline.score(x)?;
        let p_hat = tail_probability(self.baseline.sorted_stats(), score, self.config.floor_zero_pvalue)?;
        // Unfloored zero p-values give infinite evidence.
        let s_hat = if p_hat == 0.0 { f64::INFINITY } else { evidence(p_hat, self.config.alpha)? };
        Ok((score, p_hat, s_hat))
    }

    /// Processes one observation; errors with illegal-state after an alarm.
    pub fn step(&mut self, x: &[f64]) -> Result<StepRecord> {
        if self.state.is_stopped() {
            return Err(Error::IllegalState("detector already stopped".into()));
        }
        let (score, p_hat, s_hat) = self.evaluate(x)?;
        self.state = update(self.state, s_hat, &self.config)?;
        Ok(StepRecord {
            t: self.state.t,
            score,
            p_hat,
            s_hat,
            g: self.state.g,
            alarm: self.state.is_stopped(),
        })
    }
}

impl<B: NominalBaseline> SequentialDetector for TailCusum<B> {
    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        // Threshold-free: the harness decides stopping for many h at once.
        let (_, _, s_hat) = self.evaluate(x)?;
        self.state.g = cusum_step(self.state.g, s_hat);
        self.state.t += 1;
        Ok(self.state.g)
    }

    fn reset(&mut self) {
        self.state = DetectorState::new();
    }
}

/// Runs the detector until the first alarm or the end of `stream`, calling
/// `on_step` for every processed observation.
pub fn run_with<B, I, X, F>(baseline: &B, stream: I, config: &DetectorConfig, mut on_step: F) -> Result<RunOutcome>
where
    B: NominalBaseline + ?Sized,
    I: IntoIterator<Item = X>,
    X: AsRef<[f64]>,
    F: FnMut(&StepRecord),
{
    let mut det = TailCusum::new(baseline, *config)?;
    for x in stream {
        let rec = det.step(x.as_ref())?;
        on_step(&rec);
        if rec.alarm {
            break;
        }
    }
    let state = det.state();
    Ok(RunOutcome { stopped_at: state.stopped_at, steps: state.t, trajectory: None })
}

/// Runs the detector; `record_trajectory` keeps every `g_t`.
pub fn run<B, I, X>(baseline: &B, stream: I, config: &DetectorConfig, record_trajectory: bool) -> Result<RunOutcome>
where
    B: NominalBaseline + ?Sized,
    I: IntoIterator<Item = X>,
    X: AsRef<[f64]>,
{
    let mut traj = Vec::new();
    let mut out = run_with(baseline, stream, config, |r| {
        if record_trajectory {
            traj.push(r.g);
        }
    })?;
    if record_trajectory {
        out.trajectory = Some(traj);
    }
    Ok(out)
}
