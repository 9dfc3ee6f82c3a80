//! Closed forms and numerical verifiers for the guarantees behind
//! dynamic time-smoothing.
//!
//! For a window `w`, decay `alpha`, and normalizer `W = sum_{i<w} alpha^i`,
//! the smoothed loss along a trajectory is
//! `S_t = (1/W) sum_{i<w} alpha^i f_{t-i}(x_{t-i})`, and the guarantees are:
//!
//! - **variance**: the smoothed stochastic gradient satisfies
//!   `E || g_hat_S - g_S ||^2 <= sigma^2 (1 - alpha^{2w}) / (W^2 (1 - alpha^2))`,
//!   tight for exact exponential weights.
//! - **forward difference**: `S_{t+1}(x_{t+1}) - S_t(x_{t+1})
//!   <= M (1 + alpha^{w-1}) / W + M (1 - alpha^{w-1}) (1 + alpha) / (W (1 - alpha))`.
//! - **telescoping difference**:
//!   `S_t(x_t) - S_{t+1}(x_{t+1}) <= 2 M (1 - alpha^w) / (W (1 - alpha))`.
//! - **cumulative regret**: with rate `eta = 1/beta` and `alpha` near 1, the
//!   dynamic local regret of the exponentially time-smoothed update is at
//!   most `(T / W) (8 beta M + sigma^2)`.
//!
//! Each `verify_*` function runs the corresponding experiment and returns a
//! [`BoundReport`] comparing the empirical quantity against the closed form.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossOracle;
use crate::optim::run_dts;
use crate::regret::{dynamic_local_regret, window_normalizer, RegretLedger};
use crate::seeding;

/// Schema version of serialized bound reports.
pub const BOUND_REPORT_SCHEMA_VERSION: u32 = 1;

/// Configuration echo carried by every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smoothness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loss_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Outcome of one analytic-versus-empirical comparison.
///
/// `violated` is true only when the empirical value exceeds the analytic one
/// by more than the recorded tolerance, i.e. `margin < -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub bound: String,
    pub analytic: f64,
    pub empirical: f64,
    /// `analytic - empirical`; negative means the empirical value is above.
    pub margin: f64,
    pub tolerance: f64,
    pub violated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    pub config: BoundConfig,
}

impl BoundReport {
    fn new(bound: &str, analytic: f64, empirical: f64, tolerance: f64, config: BoundConfig) -> Self {
        let margin = analytic - empirical;
        Self {
            schema_version: BOUND_REPORT_SCHEMA_VERSION,
            bound: bound.to_string(),
            analytic,
            empirical,
            margin,
            tolerance,
            violated: margin < -tolerance,
            note: None,
            config,
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }
}

fn check_w_alpha(window: usize, alpha: f64, allow_one: bool) -> Result<()> {
    if window < 1 {
        return Err(Error::Config(format!("window must be at least 1, got {window}")));
    }
    let hi_ok = if allow_one { alpha <= 1.0 } else { alpha < 1.0 };
    if !(alpha > 0.0 && hi_ok) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1{}], got {alpha}",
            if allow_one { "" } else { ")" }
        )));
    }
    Ok(())
}

/// Variance of the exponentially weighted average of `w` independent
/// gradient estimates: `sigma^2 (1 - alpha^{2w}) / (W^2 (1 - alpha^2))`.
/// Continued by its limit `sigma^2 / w` at `alpha = 1`.
pub fn variance_bound(sigma: f64, window: usize, alpha: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("sigma must be nonnegative, got {sigma}")));
    }
    check_w_alpha(window, alpha, true)?;
    if alpha == 1.0 {
        return Ok(sigma * sigma / window as f64);
    }
    let normalizer = window_normalizer(window, alpha);
    let w2 = window as i32 * 2;
    Ok(sigma * sigma * (1.0 - alpha.powi(w2)) / (normalizer * normalizer * (1.0 - alpha * alpha)))
}

/// Bound on the forward smoothed-loss difference at a common point,
/// `S_{t+1}(x_{t+1}) - S_t(x_{t+1})`. Singular at `alpha = 1` (refused; no
/// stated continuation).
pub fn forward_difference_bound(loss_bound: f64, window: usize, alpha: f64) -> Result<f64> {
    if !(loss_bound > 0.0) {
        return Err(Error::Config(format!("loss bound must be positive, got {loss_bound}")));
    }
    check_w_alpha(window, alpha, false)?;
    let normalizer = window_normalizer(window, alpha);
    let a_pow = alpha.powi(window as i32 - 1);
    Ok(loss_bound * (1.0 + a_pow) / normalizer
        + loss_bound * (1.0 - a_pow) * (1.0 + alpha) / (normalizer * (1.0 - alpha)))
}

/// Bound on the telescoping smoothed-loss difference,
/// `S_t(x_t) - S_{t+1}(x_{t+1})`: `2 M (1 - alpha^w) / (W (1 - alpha))`,
/// continued by its limit `2 M` at `alpha = 1`.
pub fn telescoping_difference_bound(loss_bound: f64, window: usize, alpha: f64) -> Result<f64> {
    if !(loss_bound > 0.0) {
        return Err(Error::Config(format!("loss bound must be positive, got {loss_bound}")));
    }
    check_w_alpha(window, alpha, true)?;
    if alpha == 1.0 {
        return Ok(2.0 * loss_bound);
    }
    let normalizer = window_normalizer(window, alpha);
    Ok(2.0 * loss_bound * (1.0 - alpha.powi(window as i32)) / (normalizer * (1.0 - alpha)))
}

/// Cumulative dynamic-local-regret bound `(T / W) (8 beta M + sigma^2)` for
/// the exponentially time-smoothed update at rate `eta = 1/beta`.
pub fn regret_bound(
    steps: usize,
    window: usize,
    alpha: f64,
    smoothness: f64,
    loss_bound: f64,
    sigma: f64,
) -> Result<f64> {
    if steps < 1 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if !(smoothness > 0.0) || !(loss_bound > 0.0) || !(sigma >= 0.0) {
        return Err(Error::Config("constants must be positive (sigma nonnegative)".into()));
    }
    check_w_alpha(window, alpha, true)?;
    let normalizer = window_normalizer(window, alpha);
    Ok(steps as f64 / normalizer * (8.0 * smoothness * loss_bound + sigma * sigma))
}

/// Monte Carlo check of [`variance_bound`]: draws `samples` independent
/// smoothed gradients at fixed states and compares the mean squared
/// deviation against the closed form, with a 3-standard-error tolerance.
/// Refuses fewer than `10^4` samples.
pub fn verify_variance_bound(
    oracle: &dyn LossOracle,
    window: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_w_alpha(window, alpha, true)?;
    if samples < 10_000 {
        return Err(Error::Config(format!(
            "need at least 10000 Monte Carlo samples for a meaningful tolerance, got {samples}"
        )));
    }
    let sigma = oracle.meta().noise_std;
    let analytic = variance_bound(sigma, window, alpha)?;
    let dim = oracle.dim();
    let normalizer = window_normalizer(window, alpha);

    // Fixed evaluation states: one per window slot, anchored at t = window so
    // every index is live.
    use rand::Rng;
    let mut state_rng = seeding::rng_for(seed, 1);
    let states: Vec<Vec<f64>> = (0..window)
        .map(|_| (0..dim).map(|_| state_rng.random_range(-1.0..1.0)).collect())
        .collect();
    let t = window as i64;
    let exact: Vec<Vec<f64>> = (0..window).map(|i| oracle.grad(t - i as i64, &states[i])).collect();
    let mut exact_smoothed = vec![0.0; dim];
    for (i, g) in exact.iter().enumerate() {
        let weight = alpha.powi(i as i32) / normalizer;
        for (acc, gi) in exact_smoothed.iter_mut().zip(g) {
            *acc += weight * gi;
        }
    }

    let mut draw_rng = seeding::rng_for(seed, 2);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=samples {
        let mut smoothed = vec![0.0; dim];
        for (i, state) in states.iter().enumerate() {
            let g = oracle.noisy_grad(t - i as i64, state, &mut draw_rng);
            let weight = alpha.powi(i as i32) / normalizer;
            for (acc, gi) in smoothed.iter_mut().zip(&g) {
                *acc += weight * gi;
            }
        }
        let sq: f64 = smoothed
            .iter()
            .zip(&exact_smoothed)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        // Welford running mean/variance of the squared deviations.
        let delta = sq - mean;
        mean += delta / n as f64;
        m2 += delta * (sq - mean);
    }
    let sem = (m2 / (samples as f64 - 1.0)).sqrt() / (samples as f64).sqrt();

    Ok(BoundReport::new(
        "smoothed_gradient_variance",
        analytic,
        mean,
        3.0 * sem,
        BoundConfig {
            window: Some(window),
            alpha: Some(alpha),
            noise_std: Some(sigma),
            samples: Some(samples),
            seed: Some(seed),
            ..Default::default()
        },
    ))
}

/// `S_{t,w,alpha}` evaluated along the ledger's own trajectory
/// (`sum alpha^i f_{t-i}(x_{t-i}) / W`).
fn smoothed_diagonal(ledger: &RegretLedger, t: usize, window: usize, alpha: f64, normalizer: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for i in 0..window {
        let s = t as i64 - i as i64;
        if s >= 1 {
            total += weight * ledger.loss(s as usize);
        }
        weight *= alpha;
    }
    total / normalizer
}

/// `S_{t,w,alpha}` with the parameter sequence shifted one step forward:
/// each loss `f_{t-i}` is re-evaluated at `x_{t+1-i}`.
fn smoothed_shifted(
    ledger: &RegretLedger,
    oracle: &dyn LossOracle,
    t: usize,
    window: usize,
    alpha: f64,
    normalizer: f64,
) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for i in 0..window {
        let s = t as i64 - i as i64;
        if s >= 1 {
            let x = ledger.x(t + 1 - i);
            total += weight * oracle.eval(s, x);
        }
        weight *= alpha;
    }
    total / normalizer
}

/// Empirical check of the two smoothed-loss difference bounds over a
/// recorded run on a bounded family. Returns the forward-difference report
/// and the telescoping-difference report, in that order.
pub fn verify_smoothed_diffs(
    ledger: &RegretLedger,
    oracle: &dyn LossOracle,
    window: usize,
    alpha: f64,
) -> Result<(BoundReport, BoundReport)> {
    check_w_alpha(window, alpha, false)?;
    let meta = oracle.meta();
    let loss_bound = meta.loss_bound.ok_or_else(|| {
        Error::Config("smoothed-difference verification needs a certified loss bound".into())
    })?;
    if ledger.len() < 2 {
        return Err(Error::Data("need at least two recorded steps".into()));
    }
    let normalizer = window_normalizer(window, alpha);

    let mut max_forward = f64::NEG_INFINITY;
    let mut max_telescope = f64::NEG_INFINITY;
    for t in 1..ledger.len() {
        let s_t = smoothed_diagonal(ledger, t, window, alpha, normalizer);
        let s_next = smoothed_diagonal(ledger, t + 1, window, alpha, normalizer);
        let s_shift = smoothed_shifted(ledger, oracle, t, window, alpha, normalizer);
        max_forward = max_forward.max(s_next - s_shift);
        max_telescope = max_telescope.max(s_t - s_next);
    }

    let config = BoundConfig {
        steps: Some(ledger.len()),
        window: Some(window),
        alpha: Some(alpha),
        loss_bound: Some(loss_bound),
        ..Default::default()
    };
    // Pure-arithmetic inequalities; the tolerance only absorbs rounding.
    let tol = 1e-9;
    let forward = BoundReport::new(
        "smoothed_forward_difference",
        forward_difference_bound(loss_bound, window, alpha)?,
        max_forward,
        tol,
        config.clone(),
    );
    let telescope = BoundReport::new(
        "smoothed_telescoping_difference",
        telescoping_difference_bound(loss_bound, window, alpha)?,
        max_telescope,
        tol,
        config,
    );
    Ok((forward, telescope))
}

/// Run the dynamic time-smoothed update for `steps` steps at the
/// guarantee's rate `eta = 1/beta` and compare the measured dynamic local
/// regret against [`regret_bound`]. Requires certified constants; notes
/// when `alpha` is outside the near-1 regime the guarantee is stated for.
pub fn verify_regret_bound(
    oracle: &dyn LossOracle,
    steps: usize,
    window: usize,
    alpha: f64,
    seed: u64,
) -> Result<BoundReport> {
    // The guarantee is stated for alpha approaching 1 from below; the
    // regret functional itself admits alpha = 1, the verifier does not.
    check_w_alpha(window, alpha, false)?;
    let meta = oracle.meta();
    if !meta.certified() {
        return Err(Error::Config(
            "regret-bound verification needs certified constants (bounded family)".into(),
        ));
    }
    let loss_bound = meta.loss_bound.unwrap();
    let smoothness = meta.smoothness.unwrap();
    let sigma = meta.noise_std;
    let eta = 1.0 / smoothness;

    let mut rng = seeding::rng_for(seed, 3);
    let run = run_dts(oracle, steps, window, alpha, eta, vec![0.0; oracle.dim()], &mut rng)?;
    let empirical = dynamic_local_regret(&run.ledger, window, alpha)?;
    let analytic = regret_bound(steps, window, alpha, smoothness, loss_bound, sigma)?;

    let mut report = BoundReport::new(
        "dynamic_local_regret",
        analytic,
        empirical,
        0.0,
        BoundConfig {
            steps: Some(steps),
            window: Some(window),
            alpha: Some(alpha),
            eta: Some(eta),
            smoothness: Some(smoothness),
            loss_bound: Some(loss_bound),
            noise_std: Some(sigma),
            seed: Some(seed),
            ..Default::default()
        },
    );
    if alpha < 0.9 {
        report = report.with_note(format!(
            "alpha = {alpha} is far from 1; the guarantee is stated for alpha approaching 1 from below"
        ));
    }
    Ok(report)
}

/// Drive the dynamic update over a family and return the ledger — shared by
/// verifiers and examples that need a trajectory on a bounded family.
pub fn dts_run_ledger(
    oracle: &dyn LossOracle,
    steps: usize,
    window: usize,
    alpha: f64,
    eta: f64,
    seed: u64,
    rng: Option<&mut dyn RngCore>,
) -> Result<RegretLedger> {
    let mut own;
    let rng: &mut dyn RngCore = match rng {
        Some(r) => r,
        None => {
            own = seeding::rng_for(seed, 4);
            &mut own
        }
    };
    Ok(run_dts(oracle, steps, window, alpha, eta, vec![0.0; oracle.dim()], rng)?.ledger)
}

/// The standard verification battery: the Monte Carlo variance check at
/// three (window, alpha) points, the smoothed-difference checks on sinusoid
/// runs, and the cumulative-regret check across windows and noise levels.
/// `thorough` widens the regret check to ten seeds and the full horizon.
pub fn standard_battery(thorough: bool) -> Result<Vec<BoundReport>> {
    let mut reports = Vec::new();

    for &(window, alpha) in &[(1usize, 0.5), (10, 0.99), (50, 0.999)] {
        let fam = crate::losses::SinusoidFamily::new(1.0, vec![0.3; window.max(2)], 4)?;
        let noisy = crate::losses::with_gaussian_noise(fam, 1.0, 17)?;
        reports.push(verify_variance_bound(&noisy, window, alpha, 100_000, 0)?);
    }

    for &alpha in &[0.9, 0.99] {
        let steps = 400;
        let fam = crate::losses::SinusoidFamily::random_phases(1.0, steps, 1, 23)?;
        let ledger = dts_run_ledger(&fam, steps, 10, alpha, 1.0, 1, None)?;
        let (forward, telescope) = verify_smoothed_diffs(&ledger, &fam, 10, alpha)?;
        reports.push(forward);
        reports.push(telescope);
    }

    let steps = if thorough { 2000 } else { 500 };
    let seeds: Vec<u64> = if thorough { (0..10).collect() } else { vec![0, 1] };
    for &sigma in &[0.0, 0.5] {
        for &window in &[10usize, 50, 100] {
            for &seed in &seeds {
                let fam = crate::losses::SinusoidFamily::random_phases(1.0, steps, 1, seed)?;
                let noisy = crate::losses::with_gaussian_noise(fam, sigma, seed)?;
                reports.push(verify_regret_bound(&noisy, steps, window, 0.999, seed)?);
            }
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{with_gaussian_noise, LossOracle, QuadraticFamily, SinusoidFamily, SmoothnessMeta};
    use approx::assert_abs_diff_eq;

    #[test]
    fn variance_bound_values() {
        // sigma=2, w=2, alpha=0.5: W = 1.5, 4 (1 - 1/16) / (2.25 * 0.75) = 20/9.
        assert_abs_diff_eq!(variance_bound(2.0, 2, 0.5).unwrap(), 20.0 / 9.0, epsilon = 1e-15);
        // w = 1 collapses to sigma^2 for any alpha.
        for alpha in [0.3, 0.7, 0.99] {
            assert_abs_diff_eq!(variance_bound(1.5, 1, alpha).unwrap(), 2.25, epsilon = 1e-12);
        }
        // alpha -> 1 limit is sigma^2 / w.
        assert_abs_diff_eq!(variance_bound(1.0, 8, 1.0).unwrap(), 0.125);
    }

    #[test]
    fn variance_bound_is_continuous_at_one() {
        for w in [2usize, 10, 50] {
            let near = variance_bound(1.0, w, 1.0 - 1e-9).unwrap();
            let limit = variance_bound(1.0, w, 1.0).unwrap();
            assert!(
                (near - limit).abs() <= 1e-6 * limit,
                "w={w}: {near} vs {limit}"
            );
        }
    }

    #[test]
    fn variance_bound_monotonicity() {
        // Nonincreasing in w near alpha = 1; nondecreasing in sigma.
        let alpha = 1.0 - 1e-9;
        let mut prev = f64::INFINITY;
        for w in [1usize, 2, 5, 10, 50, 100] {
            let b = variance_bound(1.0, w, alpha).unwrap();
            assert!(b <= prev + 1e-15);
            prev = b;
        }
        let mut prev = 0.0;
        for sigma in [0.0, 0.5, 1.0, 2.0] {
            let b = variance_bound(sigma, 10, 0.99).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn forward_difference_values() {
        // w=1: 2M exactly.
        assert_abs_diff_eq!(forward_difference_bound(1.0, 1, 0.5).unwrap(), 2.0);
        assert_abs_diff_eq!(forward_difference_bound(3.0, 1, 0.9).unwrap(), 6.0);
        // M=1, w=2, alpha=0.5: 1 + 1 = 2.
        assert_abs_diff_eq!(forward_difference_bound(1.0, 2, 0.5).unwrap(), 2.0, epsilon = 1e-15);
        // Homogeneous degree 1 in M.
        let base = forward_difference_bound(1.0, 7, 0.8).unwrap();
        assert_abs_diff_eq!(forward_difference_bound(4.0, 7, 0.8).unwrap(), 4.0 * base, epsilon = 1e-12);
        // Singular at alpha = 1.
        assert!(forward_difference_bound(1.0, 3, 1.0).is_err());
    }

    #[test]
    fn telescoping_difference_values() {
        assert_abs_diff_eq!(telescoping_difference_bound(1.0, 1, 0.3).unwrap(), 2.0);
        // M=1, w=2, alpha=0.5: 2 * 0.75 / 0.75 = 2.
        assert_abs_diff_eq!(telescoping_difference_bound(1.0, 2, 0.5).unwrap(), 2.0, epsilon = 1e-15);
        // alpha = 1 limit is 2M.
        assert_abs_diff_eq!(telescoping_difference_bound(2.5, 9, 1.0).unwrap(), 5.0);
        // Positive and homogeneous in M.
        let base = telescoping_difference_bound(1.0, 12, 0.95).unwrap();
        assert!(base > 0.0);
        assert_abs_diff_eq!(telescoping_difference_bound(3.0, 12, 0.95).unwrap(), 3.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn regret_bound_values() {
        // alpha -> 1: W -> w, so T (8 beta M + sigma^2) / w.
        assert_abs_diff_eq!(regret_bound(1000, 50, 1.0, 1.0, 1.0, 0.0).unwrap(), 160.0);
        // Doubling w halves the bound in the alpha -> 1 limit.
        let b1 = regret_bound(100, 10, 1.0, 1.0, 1.0, 0.0).unwrap();
        let b2 = regret_bound(100, 20, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(b1, 2.0 * b2, epsilon = 1e-12);
        // Monotone in T, M, beta, sigma.
        assert!(regret_bound(200, 10, 0.99, 1.0, 1.0, 0.0).unwrap()
            > regret_bound(100, 10, 0.99, 1.0, 1.0, 0.0).unwrap());
        assert!(regret_bound(100, 10, 0.99, 1.0, 1.0, 1.0).unwrap()
            > regret_bound(100, 10, 0.99, 1.0, 1.0, 0.0).unwrap());
        assert!(regret_bound(100, 10, 0.99, 1.0, 2.0, 0.0).unwrap()
            > regret_bound(100, 10, 0.99, 1.0, 1.0, 0.0).unwrap());
        assert!(regret_bound(100, 10, 0.99, 2.0, 1.0, 0.0).unwrap()
            > regret_bound(100, 10, 0.99, 1.0, 1.0, 0.0).unwrap());
    }

    #[test]
    fn variance_verification_zero_noise() {
        let fam = SinusoidFamily::new(1.0, vec![0.1; 5], 3).unwrap();
        let noisy = with_gaussian_noise(fam, 0.0, 1).unwrap();
        let report = verify_variance_bound(&noisy, 5, 0.9, 10_000, 0).unwrap();
        assert_eq!(report.empirical, 0.0);
        assert_abs_diff_eq!(report.margin, report.analytic);
        assert!(!report.violated);
    }

    #[test]
    fn variance_verification_is_tight_for_gaussian_noise() {
        let fam = SinusoidFamily::new(1.0, vec![0.1; 10], 4).unwrap();
        let noisy = with_gaussian_noise(fam, 1.0, 33).unwrap();
        let report = verify_variance_bound(&noisy, 10, 0.99, 100_000, 0).unwrap();
        assert!(!report.violated, "{report:?}");
        // Tight: Monte Carlo mean within 5% of the closed form.
        assert!(
            (report.empirical - report.analytic).abs() <= 0.05 * report.analytic,
            "empirical {} vs analytic {}",
            report.empirical,
            report.analytic
        );

        let report = verify_variance_bound(&noisy, 4, 0.5, 20_000, 1).unwrap();
        assert!(!report.violated);
    }

    #[test]
    fn variance_verification_refuses_small_samples() {
        let fam = SinusoidFamily::new(1.0, vec![0.1; 4], 2).unwrap();
        let noisy = with_gaussian_noise(fam, 1.0, 1).unwrap();
        assert!(verify_variance_bound(&noisy, 4, 0.9, 9_999, 0).is_err());
    }

    #[test]
    fn smoothed_diffs_hold_on_sinusoid_run() {
        let fam = SinusoidFamily::random_phases(1.0, 400, 1, 17).unwrap();
        let ledger = dts_run_ledger(&fam, 400, 10, 0.99, 1.0, 5, None).unwrap();
        let (forward, telescope) = verify_smoothed_diffs(&ledger, &fam, 10, 0.99).unwrap();
        assert!(!forward.violated, "{forward:?}");
        assert!(!telescope.violated, "{telescope:?}");
    }

    #[test]
    fn smoothed_diffs_constant_losses_stay_under_bounds() {
        // f_t identically c: both differences collapse to boundary terms.
        struct Constant(f64);
        impl LossOracle for Constant {
            fn horizon(&self) -> usize {
                100
            }
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, t: i64, _x: &[f64]) -> f64 {
                if t <= 0 {
                    0.0
                } else {
                    self.0
                }
            }
            fn grad(&self, _t: i64, x: &[f64]) -> Vec<f64> {
                vec![0.0; x.len()]
            }
            fn meta(&self) -> SmoothnessMeta {
                SmoothnessMeta {
                    loss_bound: Some(self.0.abs()),
                    lipschitz: Some(0.0),
                    smoothness: Some(0.0),
                    noise_std: 0.0,
                }
            }
        }
        let fam = Constant(0.8);
        let ledger = dts_run_ledger(&fam, 50, 6, 0.95, 1.0, 0, None).unwrap();
        let (forward, telescope) = verify_smoothed_diffs(&ledger, &fam, 6, 0.95).unwrap();
        assert!(!forward.violated);
        assert!(!telescope.violated);
    }

    #[test]
    fn smoothed_diffs_adversarial_spike_approaches_forward_bound() {
        // Constructed worst case for w = 2: losses pinned at -M except a
        // single +M spike. The forward difference reaches 2M/W against a
        // bound of 2M(1+alpha)/W, i.e. within a factor 1/(1+alpha) — the
        // bound's order exactly.
        struct Spike {
            magnitude: f64,
            at: i64,
        }
        impl LossOracle for Spike {
            fn horizon(&self) -> usize {
                200
            }
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, t: i64, _x: &[f64]) -> f64 {
                if t <= 0 {
                    0.0
                } else if t == self.at {
                    self.magnitude
                } else {
                    -self.magnitude
                }
            }
            fn grad(&self, _t: i64, x: &[f64]) -> Vec<f64> {
                vec![0.0; x.len()]
            }
            fn meta(&self) -> SmoothnessMeta {
                SmoothnessMeta {
                    loss_bound: Some(self.magnitude),
                    lipschitz: Some(0.0),
                    smoothness: Some(0.0),
                    noise_std: 0.0,
                }
            }
        }
        let fam = Spike { magnitude: 1.0, at: 100 };
        let (w, alpha) = (2usize, 0.9);
        let ledger = dts_run_ledger(&fam, 200, w, alpha, 1.0, 0, None).unwrap();
        let (forward, _) = verify_smoothed_diffs(&ledger, &fam, w, alpha).unwrap();
        assert!(!forward.violated);
        let normalizer = window_normalizer(w, alpha);
        assert_abs_diff_eq!(forward.empirical, 2.0 / normalizer, epsilon = 1e-12);
        assert!(
            forward.empirical >= forward.analytic / (1.0 + alpha) - 1e-9,
            "worst case should approach the bound's order: empirical {} vs bound {}",
            forward.empirical,
            forward.analytic
        );
    }

    #[test]
    fn smoothed_diffs_refuse_unbounded_family() {
        let fam = QuadraticFamily::scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let ledger = dts_run_ledger(&fam, 4, 2, 0.9, 0.1, 0, None).unwrap();
        assert!(verify_smoothed_diffs(&ledger, &fam, 2, 0.9).is_err());
    }

    #[test]
    fn regret_bound_flat_gradients_trivially_pass() {
        struct Flat;
        impl LossOracle for Flat {
            fn horizon(&self) -> usize {
                50
            }
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, _t: i64, _x: &[f64]) -> f64 {
                0.0
            }
            fn grad(&self, _t: i64, x: &[f64]) -> Vec<f64> {
                vec![0.0; x.len()]
            }
            fn meta(&self) -> SmoothnessMeta {
                SmoothnessMeta {
                    loss_bound: Some(1.0),
                    lipschitz: Some(1.0),
                    smoothness: Some(1.0),
                    noise_std: 0.0,
                }
            }
        }
        let report = verify_regret_bound(&Flat, 50, 5, 0.999, 0).unwrap();
        assert_eq!(report.empirical, 0.0);
        assert!(!report.violated);
    }

    #[test]
    fn regret_bound_holds_on_sinusoid_runs() {
        let steps = 500;
        for &w in &[10usize, 50] {
            let fam = SinusoidFamily::random_phases(1.0, steps, 1, 42).unwrap();
            let report = verify_regret_bound(&fam, steps, w, 0.999, 0).unwrap();
            assert!(!report.violated, "w={w}: {report:?}");
        }
    }

    #[test]
    fn regret_bound_refuses_uncertified_meta() {
        let fam = QuadraticFamily::scalar(&[1.0, 2.0]).unwrap();
        assert!(verify_regret_bound(&fam, 2, 1, 0.99, 0).is_err());
    }

    #[test]
    fn regret_bound_verifier_rejects_alpha_one() {
        // The regret functional admits alpha = 1; the verifier does not,
        // because the guarantee is a one-sided limit.
        let fam = SinusoidFamily::random_phases(1.0, 10, 1, 0).unwrap();
        assert!(matches!(verify_regret_bound(&fam, 10, 2, 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn regret_bound_notes_low_alpha() {
        let fam = SinusoidFamily::random_phases(1.0, 50, 1, 1).unwrap();
        let report = verify_regret_bound(&fam, 50, 5, 0.5, 0).unwrap();
        assert!(report.note.is_some());
    }

    #[test]
    fn bound_report_round_trips_through_json() {
        let fam = SinusoidFamily::new(1.0, vec![0.2; 6], 2).unwrap();
        let noisy = with_gaussian_noise(fam, 0.5, 2).unwrap();
        let report = verify_variance_bound(&noisy, 6, 0.9, 10_000, 7).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: BoundReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
        assert_eq!(back.schema_version, BOUND_REPORT_SCHEMA_VERSION);
    }
}
