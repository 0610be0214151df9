//! False-alarm theory for the tail-probability CUSUM.
//!
//! Under the nominal law the p-value is uniform, so the evidence
//! `s = ln(α/U)` has density `α e^{-y}` on `(ln α, ∞)`, mean `1 + ln α`
//! and second moment `1 + (1 + ln α)²`. For `α < 1/e` the drift is negative
//! and the average false-alarm period obeys
//!
//! ```text
//! E∞[Γ] ≥ exp((1 − θ) h),   θ = W₀(α ln α) / ln α,
//! ```
//!
//! where `θ ∈ (0, 1)` is the nontrivial root of `θ e^{θ ln α} = α`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::cusum_step;
use crate::error::{Error, Result};

/// `1/e`.
pub const INV_E: f64 = 0.367_879_441_171_442_3;

/// Principal branch of the Lambert-W function, `W₀(c) ≥ −1` with `W e^W = c`.
pub fn lambert_w0(c: f64) -> Result<f64> {
    if c.is_nan() {
        return Err(Error::domain("Lambert W of NaN"));
    }
    if c <= -INV_E {
        // Allow a couple of ulps of slack for arguments computed as α ln α.
        if c >= -INV_E - 1e-15 {
            return Ok(-1.0);
        }
        return Err(Error::domain(alloc::format!("Lambert W0 undefined for {c} < -1/e")));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    if c == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let mut w = if c < -0.25 {
        // Series about the branch point.
        let p = libm::sqrt(2.0 * (core::f64::consts::E * c + 1.0));
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if c < 3.0 {
        libm::log1p(c)
    } else {
        let l1 = libm::log(c);
        let l2 = libm::log(l1);
        l1 - l2 + l2 / l1
    };

    let tol = (4.0 * f64::EPSILON * c.abs()).min(1e-14);
    for _ in 0..50 {
        let ew = libm::exp(w);
        let f = w * ew - c;
        if f.abs() <= tol {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        if !step.is_finite() {
            break;
        }
        let next = w - step;
        if next == w {
            return Ok(w);
        }
        w = next;
    }
    let residual = w * libm::exp(w) - c;
    if residual.abs() <= 1e-12 * c.abs().max(1.0) {
        Ok(w)
    } else {
        Err(Error::Numeric(alloc::format!("Lambert W did not converge at c = {c}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < INV_E {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!(
            "alpha = {alpha} violates 0 < alpha < 1/e; the nominal statistic drifts upward"
        )))
    }
}

fn check_h(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("threshold h = {h} must be finite and >= 0")))
    }
}

/// `θ(α) = W₀(α ln α) / ln α` for `0 < α < 1/e`.
pub fn theta_of_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let la = libm::log(alpha);
    Ok(lambert_w0(alpha * la)? / la)
}

/// Asymptotic lower bound `e^{(1−θ)h}` on the average false-alarm period.
pub fn afp_lower_bound(alpha: f64, h: f64) -> Result<f64> {
    check_h(h)?;
    let theta = theta_of_alpha(alpha)?;
    Ok(libm::exp((1.0 - theta) * h))
}

/// Smallest threshold whose lower bound reaches `min_afp` (≥ 1).
pub fn threshold_for_bound(alpha: f64, min_afp: f64) -> Result<f64> {
    if !(min_afp >= 1.0 && min_afp.is_finite()) {
        return Err(Error::domain("desired false-alarm period must be finite and >= 1"));
    }
    let theta = theta_of_alpha(alpha)?;
    Ok(libm::log(min_afp) / (1.0 - theta))
}

/// Tabulated Monte Carlo ratios `g(α)` between the false-alarm period and
/// its lower bound.
pub const G_TABLE: [(f64, f64); 8] = [
    (0.01, 101.0),
    (0.05, 21.8),
    (0.1, 12.1),
    (0.15, 9.9),
    (0.2, 10.1),
    (0.25, 13.0),
    (0.3, 25.8),
    (0.35, 230.0),
];

/// A table lookup that may have been interpolated between knots.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Approximation {
    pub value: f64,
    /// False when `α` hit a tabulated knot exactly.
    pub interpolated: bool,
}

/// `g(α)` from [`G_TABLE`], log-linear between knots; no extrapolation.
pub fn g_factor(alpha: f64) -> Result<Approximation> {
    let (lo, hi) = (G_TABLE[0].0, G_TABLE[G_TABLE.len() - 1].0);
    if !(alpha >= lo && alpha <= hi) {
        return Err(Error::domain(alloc::format!("g(alpha) is tabulated only on [{lo}, {hi}], got {alpha}")));
    }
    for &(a, g) in &G_TABLE {
        if a == alpha {
            return Ok(Approximation { value: g, interpolated: false });
        }
    }
    let i = G_TABLE.iter().position(|&(a, _)| a > alpha).unwrap_or(G_TABLE.len() - 1);
    let (a0, g0) = G_TABLE[i - 1];
    let (a1, g1) = G_TABLE[i];
    let w = (alpha - a0) / (a1 - a0);
    let lg = (1.0 - w) * libm::log(g0) + w * libm::log(g1);
    Ok(Approximation { value: libm::exp(lg), interpolated: true })
}

/// `g(α) e^{(1−θ)h}`.
pub fn afp_approximation(alpha: f64, h: f64) -> Result<Approximation> {
    let g = g_factor(alpha)?;
    let bound = afp_lower_bound(alpha, h)?;
    Ok(Approximation { value: g.value * bound, interpolated: g.interpolated })
}

/// Threshold whose approximate false-alarm period equals `target_afp`
/// (clamped at zero when the target is below `g(α)`).
pub fn threshold_for_afp(alpha: f64, target_afp: f64) -> Result<Approximation> {
    if !(target_afp >= 1.0 && target_afp.is_finite()) {
        return Err(Error::domain("target false-alarm period must be finite and >= 1"));
    }
    let g = g_factor(alpha)?;
    let theta = theta_of_alpha(alpha)?;
    let h = (libm::log(target_afp / g.value) / (1.0 - theta)).max(0.0);
    Ok(Approximation { value: h, interpolated: g.interpolated })
}

/// Wald's boundary-crossing approximation, which ignores overshoot.
pub fn wald_approximation(alpha: f64, h: f64) -> Result<f64> {
    check_h(h)?;
    let theta = theta_of_alpha(alpha)?;
    let drift = 1.0 + libm::log(alpha);
    Ok((h + libm::expm1((1.0 - theta) * h) / (theta - 1.0)) / drift)
}

/// Mean of the nominal evidence, `1 + ln α`.
pub fn nominal_evidence_mean(alpha: f64) -> f64 {
    1.0 + libm::log(alpha)
}

/// Second moment of the nominal evidence, `1 + (1 + ln α)²`.
pub fn nominal_evidence_second_moment(alpha: f64) -> f64 {
    let m = nominal_evidence_mean(alpha);
    1.0 + m * m
}

/// `ln(α/u)` for a uniform draw `u ∈ (0, 1]`.
#[inline]
pub fn evidence_from_uniform(alpha: f64, u: f64) -> f64 {
    libm::log(alpha / u)
}

/// One draw from the exact nominal evidence law.
#[inline]
pub fn sample_nominal_evidence<R: RngCore + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // random() is on [0, 1); flip it onto (0, 1].
    let u = 1.0 - rng.random::<f64>();
    evidence_from_uniform(alpha, u)
}

/// Stopping time of one asymptotic-regime run with threshold `h`.
pub fn asymptotic_stopping_time<R: RngCore + ?Sized>(alpha: f64, h: f64, rng: &mut R) -> u64 {
    let mut g = 0.0;
    let mut t = 0u64;
    loop {
        t += 1;
        g = cusum_step(g, sample_nominal_evidence(alpha, rng));
        if g >= h {
            return t;
        }
    }
}

/// RNG for trial `trial` of an experiment seeded with `master_seed`.
///
/// Trials use disjoint ChaCha streams, so results do not depend on the order
/// or the thread in which trials run.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

/// Mean false-alarm period of the detector driven by exact nominal evidence.
pub fn simulate_afp_asymptotic(alpha: f64, h: f64, trials: u64, seed: u64) -> Result<MeanEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    check_h(h)?;
    if trials == 0 {
        return Err(Error::invalid("zero trials"));
    }
    // Welford accumulation in trial order.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..trials {
        let mut rng = trial_rng(seed, i);
        let x = asymptotic_stopping_time(alpha, h, &mut rng) as f64;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if trials > 1 { m2 / (trials - 1) as f64 } else { 0.0 };
    Ok(MeanEstimate { mean, std_error: libm::sqrt(var / trials as f64), n: trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: bisection on θ α^θ − α over (1e−9, 1 − 1e−9).
    fn theta_bisection(alpha: f64) -> f64 {
        let f = |t: f64| t * libm::exp(t * libm::log(alpha)) - alpha;
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_w_special_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(core::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(lambert_w0(-INV_E).unwrap(), -1.0);
        assert!(matches!(lambert_w0(-0.5), Err(Error::Domain(_))));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_w_satisfies_defining_equation() {
        let mut c = -INV_E + 1e-12;
        while c < 1e6 {
            let w = lambert_w0(c).unwrap();
            assert!(w >= -1.0);
            let back = w * libm::exp(w);
            assert!((back - c).abs() <= 1e-12 * c.abs().max(1e-300) + 1e-15, "c = {c}");
            c = if c < 0.0 { c * 0.7 + 1e-6 } else { c * 1.9 + 1e-3 };
        }
    }

    #[test]
    fn theta_matches_bisection() {
        for alpha in [0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35] {
            let t = theta_of_alpha(alpha).unwrap();
            assert!((t - theta_bisection(alpha)).abs() < 1e-9, "alpha {alpha}");
            assert!(t > 0.0 && t < 1.0);
            assert!((t * libm::exp(t * libm::log(alpha)) - alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_reference_values() {
        // θ(1/4) = 1/2 exactly: (1/2)(1/4)^(1/2) = 1/4.
        assert!((theta_of_alpha(0.25).unwrap() - 0.5).abs() < 1e-12);
        assert!((theta_of_alpha(0.2).unwrap() - 0.35298).abs() < 1e-4);
        assert!((theta_of_alpha(0.1).unwrap() - 0.13713).abs() < 1e-4);
        assert!(theta_of_alpha(0.36).unwrap() > 0.9);
    }

    #[test]
    fn theta_domain() {
        for bad in [0.0, -0.1, INV_E, 0.5, 1.0, f64::NAN] {
            assert!(matches!(theta_of_alpha(bad), Err(Error::Domain(_))), "{bad}");
        }
    }

    #[test]
    fn theta_is_increasing() {
        let mut prev = 0.0;
        for i in 1..36 {
            let t = theta_of_alpha(i as f64 * 0.01).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn lower_bound_values() {
        let theta = theta_bisection(0.2);
        let want = libm::exp((1.0 - theta) * 10.0);
        assert!((afp_lower_bound(0.2, 10.0).unwrap() - want).abs() < 1e-8 * want);
        assert!((want - 645.58).abs() < 0.01);
        assert_eq!(afp_lower_bound(0.2, 0.0).unwrap(), 1.0);
        let mut prev = 0.0;
        for h in 0..30 {
            let b = afp_lower_bound(0.2, h as f64).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn threshold_inverts_bound() {
        assert_eq!(threshold_for_bound(0.2, 1.0).unwrap(), 0.0);
        let h = threshold_for_bound(0.2, 1e6).unwrap();
        assert!((h - 21.35267).abs() < 1e-4);
        assert!((afp_lower_bound(0.2, h).unwrap() / 1e6 - 1.0).abs() < 1e-9);
        let h = threshold_for_bound(0.1, 1e6).unwrap();
        assert!((h - 16.0111).abs() < 1e-3);
        assert!(threshold_for_bound(0.2, 0.5).is_err());
    }

    #[test]
    fn g_table_lookup() {
        assert_eq!(g_factor(0.2).unwrap(), Approximation { value: 10.1, interpolated: false });
        assert_eq!(g_factor(0.01).unwrap().value, 101.0);
        let mid = g_factor(0.175).unwrap();
        assert!(mid.interpolated);
        assert!((mid.value - libm::sqrt(9.9 * 10.1)).abs() < 1e-9);
        assert!(g_factor(0.005).is_err());
        assert!(g_factor(0.36).is_err());
    }

    #[test]
    fn approximation_values() {
        assert_eq!(afp_approximation(0.01, 0.0).unwrap().value, 101.0);
        assert_eq!(afp_approximation(0.2, 0.0).unwrap().value, 10.1);
        let a = afp_approximation(0.2, 10.0).unwrap().value;
        assert!((a - 10.1 * 645.5845).abs() < 0.01);
        // The approximation dominates the bound across the table.
        for &(alpha, _) in &G_TABLE {
            for h in 2..=15 {
                let h = h as f64;
                assert!(afp_lower_bound(alpha, h).unwrap() <= afp_approximation(alpha, h).unwrap().value);
            }
        }
    }

    #[test]
    fn threshold_for_target_afp_round_trips() {
        let h = threshold_for_afp(0.2, 1e4).unwrap().value;
        assert!((afp_approximation(0.2, h).unwrap().value / 1e4 - 1.0).abs() < 1e-9);
        assert_eq!(threshold_for_afp(0.2, 2.0).unwrap().value, 0.0);
    }

    #[test]
    fn wald_values() {
        let w = wald_approximation(0.2, 10.0).unwrap();
        assert!((w - 1618.28).abs() < 0.05);
        let w = wald_approximation(0.1, 10.0).unwrap();
        assert!((w - 4964.79).abs() < 0.05);
        assert!(w < afp_lower_bound(0.1, 10.0).unwrap());
        assert_eq!(wald_approximation(0.2, 0.0).unwrap(), 0.0);
        assert!(wald_approximation(0.2, 1e-9).unwrap().abs() < 1e-8);
    }

    #[test]
    fn evidence_sampler_edges() {
        assert_eq!(evidence_from_uniform(0.2, 0.2), 0.0);
        assert_eq!(evidence_from_uniform(0.2, 1.0), libm::log(0.2));
    }

    #[test]
    fn evidence_sampler_moments() {
        let mut rng = trial_rng(3, 0);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let s = sample_nominal_evidence(0.2, &mut rng);
            assert!(s > libm::log(0.2) - 1e-15);
            s1 += s;
            s2 += s * s;
        }
        assert!((s1 / n as f64 - nominal_evidence_mean(0.2)).abs() < 0.01);
        assert!((s2 / n as f64 - nominal_evidence_second_moment(0.2)).abs() < 0.02);
        assert!((nominal_evidence_second_moment(0.2) - 1.37141).abs() < 1e-5);
    }

    #[test]
    fn asymptotic_afp_zero_threshold() {
        let est = simulate_afp_asymptotic(0.2, 0.0, 100, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn asymptotic_afp_against_bound_and_table() {
        let est = simulate_afp_asymptotic(0.2, 5.0, 10_000, 42).unwrap();
        let bound = afp_lower_bound(0.2, 5.0).unwrap();
        assert!(est.mean >= bound);
        let approx = afp_approximation(0.2, 5.0).unwrap().value;
        assert!((est.mean / approx - 1.0).abs() < 0.3, "mean {} approx {approx}", est.mean);
    }

    #[test]
    fn simulate_is_deterministic() {
        let a = simulate_afp_asymptotic(0.3, 3.0, 500, 9).unwrap();
        let b = simulate_afp_asymptotic(0.3, 3.0, 500, 9).unwrap();
        assert_eq!(a, b);
    }
}
