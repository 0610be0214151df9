//! Stopping-time contract shared by the proposed detector and the benchmarks.
//!
//! A detector turns each observation into a scalar decision statistic; the
//! stopping time for threshold `h` is the first step whose statistic is at
//! least `h`. None of the detectors feed the threshold back into their
//! statistic, so one pass over a stream yields the stopping times for every
//! threshold at once.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub trait SequentialDetector {
    /// Number of nominal observations to feed through [`prime`](Self::prime)
    /// before step 1 (window-based tests need full windows).
    fn warmup_len(&self) -> usize {
        0
    }

    /// Feeds history without making a decision.
    fn prime(&mut self, x: &[f64]) -> Result<()> {
        self.observe(x).map(|_| ())
    }

    /// Consumes one observation and returns the decision statistic.
    /// Windowed tests return `f64::NEG_INFINITY` until their window is full.
    fn observe(&mut self, x: &[f64]) -> Result<f64>;

    /// Back to the freshly constructed state.
    fn reset(&mut self);
}

impl<D: SequentialDetector + ?Sized> SequentialDetector for alloc::boxed::Box<D> {
    fn warmup_len(&self) -> usize {
        (**self).warmup_len()
    }
    fn prime(&mut self, x: &[f64]) -> Result<()> {
        (**self).prime(x)
    }
    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        (**self).observe(x)
    }
    fn reset(&mut self) {
        (**self).reset()
    }
}

/// Tracks first-crossing times of a statistic path for many thresholds.
#[derive(Debug, Clone)]
pub struct ThresholdCrossings {
    /// Ascending thresholds.
    thresholds: Vec<f64>,
    /// Permutation back to caller order.
    order: Vec<usize>,
    crossings: Vec<Option<u64>>,
    next: usize,
    running_max: f64,
}

impl ThresholdCrossings {
    pub fn new(thresholds: &[f64]) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::invalid("at least one threshold is required"));
        }
        if thresholds.iter().any(|h| h.is_nan()) {
            return Err(Error::invalid("threshold is NaN"));
        }
        let mut order: Vec<usize> = (0..thresholds.len()).collect();
        order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
        Ok(ThresholdCrossings {
            thresholds: order.iter().map(|&i| thresholds[i]).collect(),
            order,
            crossings: vec![None; thresholds.len()],
            next: 0,
            running_max: f64::NEG_INFINITY,
        })
    }

    /// Records the statistic at step `t`.
    pub fn record(&mut self, t: u64, stat: f64) {
        if stat > self.running_max {
            self.running_max = stat;
        }
        while self.next < self.thresholds.len() && self.running_max >= self.thresholds[self.next] {
            self.crossings[self.next] = Some(t);
            self.next += 1;
        }
    }

    /// True once every threshold has been crossed.
    pub fn done(&self) -> bool {
        self.next == self.thresholds.len()
    }

    /// Stopping times in the caller's threshold order.
    pub fn into_crossings(self) -> Vec<Option<u64>> {
        let mut out = vec![None; self.order.len()];
        for (sorted_pos, &orig) in self.order.iter().enumerate() {
            out[orig] = self.crossings[sorted_pos];
        }
        out
    }
}

/// Runs `detector` over `stream` and returns the first step `t` (1-based)
/// with statistic `≥ h`, or `None` if the stream ends first.
pub fn first_alarm<D, I, X>(detector: &mut D, stream: I, h: f64) -> Result<Option<u64>>
where
    D: SequentialDetector + ?Sized,
    I: IntoIterator<Item = X>,
    X: AsRef<[f64]>,
{
    for (i, x) in stream.into_iter().enumerate() {
        if detector.observe(x.as_ref())? >= h {
            return Ok(Some(i as u64 + 1));
        }
    }
    Ok(None)
}
