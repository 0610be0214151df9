use std::sync::Arc;

use rand::{Rng, RngCore};
use tailwatch::harness::{self, TrialOptions};
use tailwatch_core::benchmarks::NpCusum;
use tailwatch_core::simulation::{DataSource, GridModel, GridSource};
use tailwatch_core::theory::{afp_approximation, simulate_afp_asymptotic};
use tailwatch_core::{DetectorConfig, GemBaseline, PointSet, StatisticBaseline, TailCusum};

struct Constant(f64);

impl DataSource for Constant {
    fn dim(&self) -> usize {
        1
    }
    fn sample_into(&self, _: &mut dyn RngCore, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.0);
    }
}

/// Scalar statistic uniform on (0, 1).
struct Uniform;

impl DataSource for Uniform {
    fn dim(&self) -> usize {
        1
    }
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
        out.clear();
        out.push(rng.random::<f64>());
    }
}

fn grid_baseline(n: usize) -> StatisticBaseline {
    StatisticBaseline::new((1..=n).map(|i| i as f64 / n as f64).collect()).unwrap()
}

#[test]
fn constant_evidence_gives_exact_delay() {
    let base = StatisticBaseline::new((1..=100).map(f64::from).collect()).unwrap();
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let c = (0.2f64 * 100.0).ln();
    for h in [0.5, 2.0, 10.0, 25.0] {
        let est = harness::avg_detection_delay(&make, &Uniform, &Constant(1e6), h, &TrialOptions::new(20, 1, 1000)).unwrap();
        assert_eq!(est.add.mean, (h / c).ceil() - 1.0, "h = {h}");
        assert_eq!(est.add.std_error, 0.0);
        assert_eq!(est.censored, 0);
    }
}

#[test]
fn zero_threshold_stops_immediately() {
    let base = grid_baseline(50);
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let est = harness::avg_false_alarm_period(&make, &Uniform, 0.0, &TrialOptions::new(100, 2, 100)).unwrap();
    assert_eq!(est.afp.mean, 1.0);
}

#[test]
fn asymptotic_regime_matches_theory() {
    let base = grid_baseline(100_000);
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let opts = TrialOptions::new(10_000, 17, 1_000_000);
    let est = harness::avg_false_alarm_period(&make, &Uniform, 5.0, &opts).unwrap();
    assert_eq!(est.censored, 0);
    let approx = afp_approximation(0.2, 5.0).unwrap().value;
    assert!((est.afp.mean / approx - 1.0).abs() <= 0.3, "{} vs {approx}", est.afp.mean);

    let exact = simulate_afp_asymptotic(0.2, 5.0, 10_000, 23).unwrap();
    let se = (est.afp.std_error.powi(2) + exact.std_error.powi(2)).sqrt();
    assert!((est.afp.mean - exact.mean).abs() <= 3.0 * se, "{} vs {}", est.afp.mean, exact.mean);
}

#[test]
fn false_alarm_period_grows_with_threshold() {
    let base = grid_baseline(10_000);
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let opts = TrialOptions::new(10_000, 3, 1_000_000);
    let pts = harness::tradeoff_curve(&make, &Uniform, &Constant(2.0), &[2.0, 3.0, 4.0], &opts).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts[0].afp <= pts[1].afp && pts[1].afp <= pts[2].afp);
    assert!(pts.iter().all(|p| p.afp >= 1.0 && p.censored_frac == 0.0));
}

#[test]
fn null_drift_npcusum_is_censored() {
    let base = grid_baseline(1000);
    let make = |_| NpCusum::new(&base);
    let opts = TrialOptions::new(50, 4, 500);
    let est = harness::avg_false_alarm_period(&make, &Uniform, 1e9, &opts).unwrap();
    assert_eq!(est.censored, 50);
    assert_eq!(est.afp.mean, 500.0);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let base = grid_baseline(1000);
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let run = |jobs| {
        let opts = TrialOptions { jobs: Some(jobs), ..TrialOptions::new(300, 9, 100_000) };
        harness::tradeoff_curve(&make, &Uniform, &Constant(0.995), &[1.0, 3.0, 5.0], &opts).unwrap()
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn roc_counts_detections_within_window() {
    let base = grid_baseline(100);
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let c = 20f64.ln();
    let opts = TrialOptions::new(30, 5, 10_000);
    // Stops at step ceil(h/c): inside the window for 3c, outside for 12c.
    let pts = harness::roc_curve(&make, &Uniform, &Constant(5.0), &[0.0, 3.0 * c - 0.1, 12.0 * c - 0.1], &opts, 10).unwrap();
    assert_eq!((pts[0].tpr, pts[0].far), (1.0, 1.0));
    assert_eq!(pts[1].tpr, 1.0);
    assert_eq!(pts[2].tpr, 0.0);
    assert!(pts[2].far < pts[1].far);
}

#[test]
fn larger_attacks_are_detected_sooner() {
    let model = Arc::new(GridModel::synthetic(80, 57, 0.01, 1).unwrap());
    let nominal = GridSource::nominal(model.clone());
    let mut rng = tailwatch_core::theory::trial_rng(77, 0);
    let mut train = PointSet::with_capacity(80, 1500);
    for _ in 0..1500 {
        train.push(&nominal.sample(&mut rng)).unwrap();
    }
    let base = GemBaseline::build(&train, 500, 4, 2).unwrap();
    let make = |_| TailCusum::new(&base, DetectorConfig::new(0.2, 0.0)?);
    let opts = TrialOptions::new(300, 8, 100_000);
    let add = |mag| {
        let src = GridSource::new(model.clone(), mag).unwrap();
        harness::avg_detection_delay(&make, &nominal, &src, 10.0, &opts).unwrap().add.mean
    };
    let (small, large) = (add(0.14), add(0.28));
    assert!(large <= small, "{large} > {small}");
}
