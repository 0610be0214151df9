//! Monte Carlo evaluation of sequential detectors.
//!
//! Every trial draws from its own RNG substream of the master seed and the
//! per-trial results are aggregated in trial order, so results do not
//! depend on the number of worker threads. A single pass per trial records
//! the stopping times for all thresholds at once.
//!
//! Windowed detectors are first primed with `warmup_len()` nominal draws so
//! that their windows are full at step 1.

use rayon::prelude::*;
use serde::Serialize;
use tailwatch_core::sequential::ThresholdCrossings;
use tailwatch_core::simulation::DataSource;
use tailwatch_core::theory::{afp_approximation, trial_rng, MeanEstimate};
use tailwatch_core::{Error as CoreError, SequentialDetector};

use crate::error::Result;

pub type Source<'a> = &'a (dyn DataSource + Sync);

/// Default trial count.
pub const DEFAULT_TRIALS: u64 = 10_000;
/// Default detection window for the true positive rate.
pub const DEFAULT_ROC_WINDOW: u64 = 10;
const MIN_HORIZON: u64 = 1_000_000;
/// Substream offset separating no-change runs from delay runs.
const NOMINAL_STREAMS: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub trials: u64,
    pub seed: u64,
    /// Maximum number of steps per trial.
    pub horizon: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl TrialOptions {
    pub fn new(trials: u64, seed: u64, horizon: u64) -> Self {
        TrialOptions { trials, seed, horizon, jobs: None }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CoreError::InvalidArgument("zero trials".into()).into());
        }
        if self.horizon == 0 {
            return Err(CoreError::InvalidArgument("zero horizon".into()).into());
        }
        Ok(())
    }
}

/// `max(100 × approximate AFP, 10⁶)` for the tail-probability detector;
/// `10⁶` where the approximation does not apply.
pub fn default_horizon(alpha: f64, h: f64) -> u64 {
    match afp_approximation(alpha, h) {
        Ok(a) if a.value.is_finite() => (100.0 * a.value).max(MIN_HORIZON as f64).min(u64::MAX as f64 / 2.0) as u64,
        _ => MIN_HORIZON,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialResult {
    /// Stopping step, `None` when the horizon was reached first.
    pub gamma: Option<u64>,
    pub tau: u64,
    pub detected_within_window: bool,
}

impl TrialResult {
    pub fn new(gamma: Option<u64>, tau: u64, window: u64) -> Self {
        let detected_within_window = gamma.is_some_and(|g| g >= tau && g <= tau + window);
        TrialResult { gamma, tau, detected_within_window }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayEstimate {
    /// Mean of `(Γ − τ)⁺` over trials that stopped within the horizon.
    pub add: MeanEstimate,
    pub censored: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AfpEstimate {
    /// Mean of `Γ` with censored trials counted at the horizon, so a lower
    /// bound when `censored > 0`.
    pub afp: MeanEstimate,
    pub censored: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub h: f64,
    pub add: f64,
    pub add_se: f64,
    pub afp: f64,
    pub afp_se: f64,
    /// Fraction of no-change trials that hit the horizon.
    pub censored_frac: f64,
    /// Fraction of delay trials that hit the horizon.
    pub add_censored_frac: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub h: f64,
    pub tpr: f64,
    /// `1 / AFP`.
    pub far: f64,
    pub trials: u64,
}

/// Welford mean and standard error, accumulated in iteration order.
pub fn mean_estimate(values: impl IntoIterator<Item = f64>) -> MeanEstimate {
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let std_error = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
    MeanEstimate { mean: if n == 0 { f64::NAN } else { mean }, std_error, n }
}

fn run_parallel<T, F>(opts: &TrialOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let go = || (0..opts.trials).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?
            .install(go),
        None => go(),
    }
}

/// Stopping times of every trial for every threshold: `result[trial][i]`
/// belongs to `thresholds[i]`. Observations come from `nominal` before `tau`
/// and from `post` from `tau` on.
#[allow(clippy::too_many_arguments)]
pub fn stopping_times<F, D>(
    make: &F,
    nominal: Source<'_>,
    post: Source<'_>,
    tau: Option<u64>,
    thresholds: &[f64],
    opts: &TrialOptions,
) -> Result<Vec<Vec<Option<u64>>>>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    stopping_times_on(make, nominal, post, tau, thresholds, opts, 0)
}

fn stopping_times_on<F, D>(
    make: &F,
    nominal: Source<'_>,
    post: Source<'_>,
    tau: Option<u64>,
    thresholds: &[f64],
    opts: &TrialOptions,
    stream_offset: u64,
) -> Result<Vec<Vec<Option<u64>>>>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    opts.validate()?;
    if tau == Some(0) {
        return Err(CoreError::InvalidArgument("change point must be >= 1".into()).into());
    }
    ThresholdCrossings::new(thresholds)?;
    run_parallel(opts, |trial| {
        let mut rng = trial_rng(opts.seed, stream_offset + trial);
        let mut det = make(trial)?;
        let mut buf = Vec::with_capacity(nominal.dim());
        for _ in 0..det.warmup_len() {
            nominal.sample_into(&mut rng, &mut buf);
            det.prime(&buf)?;
        }
        let mut crossings = ThresholdCrossings::new(thresholds)?;
        for t in 1..=opts.horizon {
            let src = if tau.is_some_and(|tau| t >= tau) { post } else { nominal };
            src.sample_into(&mut rng, &mut buf);
            crossings.record(t, det.observe(&buf)?);
            if crossings.done() {
                break;
            }
        }
        Ok(crossings.into_crossings())
    })
}

fn delay_from(times: &[Vec<Option<u64>>], i: usize, tau: u64) -> DelayEstimate {
    let censored = times.iter().filter(|t| t[i].is_none()).count() as u64;
    let add = mean_estimate(times.iter().filter_map(|t| t[i]).map(|g| g.saturating_sub(tau) as f64));
    DelayEstimate { add, censored, trials: times.len() as u64 }
}

fn afp_from(times: &[Vec<Option<u64>>], i: usize, horizon: u64) -> AfpEstimate {
    let censored = times.iter().filter(|t| t[i].is_none()).count() as u64;
    let afp = mean_estimate(times.iter().map(|t| t[i].unwrap_or(horizon) as f64));
    AfpEstimate { afp, censored, trials: times.len() as u64 }
}

/// Average detection delay with the change at `τ = 1`.
pub fn avg_detection_delay<F, D>(make: &F, nominal: Source<'_>, anomalous: Source<'_>, h: f64, opts: &TrialOptions) -> Result<DelayEstimate>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    let times = stopping_times(make, nominal, anomalous, Some(1), &[h], opts)?;
    Ok(delay_from(&times, 0, 1))
}

/// Average stopping time without a change.
pub fn avg_false_alarm_period<F, D>(make: &F, nominal: Source<'_>, h: f64, opts: &TrialOptions) -> Result<AfpEstimate>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    let times = stopping_times_on(make, nominal, nominal, None, &[h], opts, NOMINAL_STREAMS)?;
    Ok(afp_from(&times, 0, opts.horizon))
}

/// ADD and AFP for each threshold.
pub fn tradeoff_curve<F, D>(
    make: &F,
    nominal: Source<'_>,
    anomalous: Source<'_>,
    thresholds: &[f64],
    opts: &TrialOptions,
) -> Result<Vec<TradeoffPoint>>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    let delays = stopping_times(make, nominal, anomalous, Some(1), thresholds, opts)?;
    let nulls = stopping_times_on(make, nominal, nominal, None, thresholds, opts, NOMINAL_STREAMS)?;
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let d = delay_from(&delays, i, 1);
            let a = afp_from(&nulls, i, opts.horizon);
            TradeoffPoint {
                h,
                add: d.add.mean,
                add_se: d.add.std_error,
                afp: a.afp.mean,
                afp_se: a.afp.std_error,
                censored_frac: a.censored as f64 / a.trials as f64,
                add_censored_frac: d.censored as f64 / d.trials as f64,
                trials: opts.trials,
            }
        })
        .collect())
}

/// True positive rate (stop within `window` steps of `τ = 1`) against the
/// false alarm rate `1/AFP`, per threshold.
pub fn roc_curve<F, D>(
    make: &F,
    nominal: Source<'_>,
    anomalous: Source<'_>,
    thresholds: &[f64],
    opts: &TrialOptions,
    window: u64,
) -> Result<Vec<RocPoint>>
where
    F: Fn(u64) -> tailwatch_core::Result<D> + Sync,
    D: SequentialDetector,
{
    let delays = stopping_times(make, nominal, anomalous, Some(1), thresholds, opts)?;
    let nulls = stopping_times_on(make, nominal, nominal, None, thresholds, opts, NOMINAL_STREAMS)?;
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let hits = delays.iter().filter(|t| TrialResult::new(t[i], 1, window).detected_within_window).count();
            let afp = afp_from(&nulls, i, opts.horizon).afp.mean;
            RocPoint { h, tpr: hits as f64 / opts.trials as f64, far: 1.0 / afp, trials: opts.trials }
        })
        .collect())
}
