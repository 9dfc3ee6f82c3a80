//! Update rules for online learning under drift.
//!
//! Five optimizers share the `x' = x - eta * direction` skeleton and differ
//! in how the direction is built:
//!
//! - [`sgd_step`]: the newest stochastic gradient, nothing else.
//! - [`momentum_step`]: exponential running sum of gradients
//!   (`v' = decay * v + g`).
//! - [`sts_sgd_step`] (static time-smoothing): re-evaluates the last `w`
//!   losses at the *current* parameters and averages — `w` fresh gradient
//!   calls per step.
//! - [`dts_sgd_step`] (dynamic exponential time-smoothing): keeps the last
//!   `w` gradients where they were computed, weights them `alpha^i`, and
//!   normalizes by `W = sum alpha^i` — one fresh gradient call per step.
//! - [`offline_retrain`]: from-scratch SGD over everything seen so far, the
//!   expensive reference strategy.
//!
//! Every step returns a [`StepReport`] whose `oracle_calls` field is an
//! exact count, not an estimate; the compute-cost comparisons downstream are
//! assertions over these counts. Missing history contributes zero (the
//! `t <= 0` padding convention), while `W` always uses the full-window
//! formula, so early steps of DTS-SGD are deliberately scaled down.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::time::Instant;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::losses::LossOracle;
use crate::regret::{window_normalizer, RegretLedger};

/// Ring buffer of the last `w` gradients with exponential weights.
///
/// `weighted_sum` returns `sum_i alpha^i g_{t-i}` over the stored entries
/// (newest has weight 1); slots not yet filled contribute zero. The
/// normalizer `W` is fixed from `(w, alpha)` at construction and never
/// shrinks to the occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientHistory {
    capacity: usize,
    decay: f64,
    normalizer: f64,
    entries: VecDeque<(i64, Vec<f64>)>,
}

impl GradientHistory {
    pub fn new(capacity: usize, decay: f64) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::Config(format!("window must be at least 1, got {capacity}")));
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {decay}")));
        }
        Ok(Self {
            capacity,
            decay,
            normalizer: window_normalizer(capacity, decay),
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `W = sum_{i=0}^{w-1} alpha^i`, fixed at construction.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, &[f64])> {
        self.entries.iter().map(|(t, g)| (*t, g.as_slice()))
    }

    /// Store the gradient taken at step `t`; evicts the oldest entry once
    /// the window is full. Steps must arrive in strictly increasing order.
    pub fn push(&mut self, t: i64, grad: Vec<f64>) -> Result<()> {
        if let Some((last, _)) = self.entries.back() {
            if t <= *last {
                return Err(Error::History(format!(
                    "history steps must be strictly increasing: got {t} after {last}"
                )));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((t, grad));
        Ok(())
    }

    /// `sum_i alpha^{t_newest - t_i} g_i` over stored entries.
    pub fn weighted_sum(&self, dim: usize) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        let newest = match self.entries.back() {
            Some((t, _)) => *t,
            None => return acc,
        };
        for (t, g) in &self.entries {
            let weight = self.decay.powi((newest - t) as i32);
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += weight * gi;
            }
        }
        acc
    }
}

/// Exact accounting for one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Time index of the step.
    pub step: i64,
    /// Fresh gradient-oracle calls made by this step (1 for sgd/momentum/dts,
    /// `min(t, w)` for sts).
    pub oracle_calls: u64,
    /// Euclidean norm of the applied displacement.
    pub step_norm: f64,
    /// Wall time of the update in seconds (informational only).
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub x: Vec<f64>,
    pub velocity: Vec<f64>,
    pub decay: f64,
}

impl MomentumState {
    pub fn new(x: Vec<f64>, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::Config(format!("momentum decay must lie in [0, 1), got {decay}")));
        }
        let velocity = vec![0.0; x.len()];
        Ok(Self { x, velocity, decay })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsState {
    pub x: Vec<f64>,
    pub window: usize,
}

impl StsState {
    pub fn new(x: Vec<f64>, window: usize) -> Result<Self> {
        if window < 1 {
            return Err(Error::Config(format!("window must be at least 1, got {window}")));
        }
        Ok(Self { x, window })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtsState {
    pub x: Vec<f64>,
    pub history: GradientHistory,
}

impl DtsState {
    pub fn new(x: Vec<f64>, window: usize, alpha: f64) -> Result<Self> {
        Ok(Self { x, history: GradientHistory::new(window, alpha)? })
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("{name} contains non-finite values")));
    }
    Ok(())
}

fn apply_displacement(x: &mut [f64], direction: &[f64], scale: f64) -> f64 {
    let mut norm_sq = 0.0;
    for (xi, di) in x.iter_mut().zip(direction) {
        let delta = scale * di;
        *xi -= delta;
        norm_sq += delta * delta;
    }
    norm_sq.sqrt()
}

/// Plain online SGD: `x' = x - eta * g`. Rejects non-finite gradients and
/// leaves the state untouched in that case.
pub fn sgd_step(state: &mut SgdState, t: i64, grad: &[f64], eta: f64) -> Result<StepReport> {
    let start = Instant::now();
    check_finite("gradient", grad)?;
    let step_norm = apply_displacement(&mut state.x, grad, eta);
    Ok(StepReport { step: t, oracle_calls: 1, step_norm, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Momentum SGD: `v' = decay * v + g`, `x' = x - eta * v'`.
pub fn momentum_step(state: &mut MomentumState, t: i64, grad: &[f64], eta: f64) -> Result<StepReport> {
    let start = Instant::now();
    check_finite("gradient", grad)?;
    for (v, g) in state.velocity.iter_mut().zip(grad) {
        *v = state.decay * *v + g;
    }
    let velocity = state.velocity.clone();
    let step_norm = apply_displacement(&mut state.x, &velocity, eta);
    Ok(StepReport { step: t, oracle_calls: 1, step_norm, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Static time-smoothed SGD: `x' = x - (eta / w) sum_{i<w} g_hat_{t-i}(x)`,
/// every gradient freshly evaluated at the current `x` — exactly
/// `min(t, w)` oracle calls (indices `t - i <= 0` vanish by padding).
pub fn sts_sgd_step(
    state: &mut StsState,
    oracle: &dyn LossOracle,
    t: i64,
    eta: f64,
    rng: &mut dyn RngCore,
) -> Result<StepReport> {
    let start = Instant::now();
    let dim = state.x.len();
    let mut sum = vec![0.0; dim];
    let mut calls = 0u64;
    for i in 0..state.window {
        let s = t - i as i64;
        if s < 1 {
            break;
        }
        if !oracle.available(s) {
            return Err(Error::History(format!(
                "static smoothing needs loss {s} at step {t}, but it is no longer available"
            )));
        }
        let g = oracle.noisy_grad(s, &state.x, rng);
        calls += 1;
        for (acc, gi) in sum.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    check_finite("windowed gradient sum", &sum)?;
    let step_norm = apply_displacement(&mut state.x, &sum, eta / state.window as f64);
    Ok(StepReport { step: t, oracle_calls: calls, step_norm, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Dynamic exponentially time-smoothed SGD: the caller supplies the single
/// fresh gradient `g_hat_t(x_t)`; the update is
/// `x' = x - (eta / W) sum_{i<w} alpha^i g_{t-i}` over the stored history.
/// A non-finite gradient is rejected with both `x` and the history
/// unchanged.
pub fn dts_sgd_step(state: &mut DtsState, t: i64, grad: &[f64], eta: f64) -> Result<StepReport> {
    let start = Instant::now();
    check_finite("gradient", grad)?;
    state.history.push(t, grad.to_vec())?;
    let dim = state.x.len();
    let sum = state.history.weighted_sum(dim);
    let step_norm = apply_displacement(&mut state.x, &sum, eta / state.history.normalizer());
    Ok(StepReport { step: t, oracle_calls: 1, step_norm, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Learning-rate schedule `eta_t = eta_0 / sqrt(t)` for `t >= 1`.
pub fn lr_schedule(eta0: f64, t: i64) -> Result<f64> {
    if t < 1 {
        return Err(Error::Config(format!("schedule index must be at least 1, got {t}")));
    }
    if !(eta0 > 0.0) {
        return Err(Error::Config(format!("base learning rate must be positive, got {eta0}")));
    }
    Ok(eta0 / (t as f64).sqrt())
}

/// Fresh-initialization choice for retraining.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Zero,
    /// Uniform in `[-scale, scale]`, drawn from the given seed.
    Uniform { scale: f64, seed: u64 },
}

impl InitKind {
    pub fn sample(&self, dim: usize) -> Vec<f64> {
        match *self {
            InitKind::Zero => vec![0.0; dim],
            InitKind::Uniform { scale, seed } => {
                use rand::Rng;
                let mut rng = crate::seeding::rng_for(seed, 0x1217);
                (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
            }
        }
    }
}

/// From-scratch SGD over all accumulated batches: `epochs` passes in batch
/// order with per-epoch rate `eta / sqrt(epoch)`. Returns the trained
/// parameters and the exact number of gradient evaluations.
///
/// `loss_grad(batch, x)` must return the gradient of batch `batch`'s loss at
/// `x`; determinism is inherited from the init seed and the fixed pass
/// order.
pub fn offline_retrain(
    dim: usize,
    n_batches: usize,
    mut loss_grad: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    epochs: usize,
    eta: f64,
    init: InitKind,
) -> Result<(Vec<f64>, u64)> {
    if n_batches == 0 {
        return Err(Error::Config("offline retraining needs at least one batch".into()));
    }
    if epochs == 0 {
        return Err(Error::Config("offline retraining needs at least one epoch".into()));
    }
    let mut state = SgdState { x: init.sample(dim) };
    let mut calls = 0u64;
    for epoch in 1..=epochs {
        let eta_e = lr_schedule(eta, epoch as i64)?;
        for b in 0..n_batches {
            let g = loss_grad(b, &state.x)?;
            calls += 1;
            sgd_step(&mut state, (epoch * n_batches + b) as i64, &g, eta_e)?;
        }
    }
    Ok((state.x, calls))
}

/// Ledger and per-step reports from driving an optimizer over a loss family.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: RegretLedger,
    pub reports: Vec<StepReport>,
}

impl RunOutput {
    pub fn total_oracle_calls(&self) -> u64 {
        self.reports.iter().map(|r| r.oracle_calls).sum()
    }
}

fn record(ledger: &mut RegretLedger, oracle: &dyn LossOracle, t: i64, x: &[f64]) -> Result<()> {
    ledger.push_step(x.to_vec(), oracle.eval(t, x), oracle.grad(t, x))
}

/// Drive plain SGD over `f_1..f_T` at a fixed rate, recording exact losses
/// and gradients along the trajectory.
pub fn run_sgd(
    oracle: &dyn LossOracle,
    steps: usize,
    eta: f64,
    x0: Vec<f64>,
    rng: &mut dyn RngCore,
) -> Result<RunOutput> {
    let mut state = SgdState { x: x0 };
    let mut ledger = RegretLedger::new(oracle.dim());
    let mut reports = Vec::with_capacity(steps);
    for t in 1..=steps as i64 {
        record(&mut ledger, oracle, t, &state.x)?;
        let g = oracle.noisy_grad(t, &state.x, rng);
        reports.push(sgd_step(&mut state, t, &g, eta)?);
    }
    ledger.set_final_x(state.x);
    Ok(RunOutput { ledger, reports })
}

/// Drive momentum SGD at a fixed rate.
pub fn run_momentum(
    oracle: &dyn LossOracle,
    steps: usize,
    decay: f64,
    eta: f64,
    x0: Vec<f64>,
    rng: &mut dyn RngCore,
) -> Result<RunOutput> {
    let mut state = MomentumState::new(x0, decay)?;
    let mut ledger = RegretLedger::new(oracle.dim());
    let mut reports = Vec::with_capacity(steps);
    for t in 1..=steps as i64 {
        record(&mut ledger, oracle, t, &state.x)?;
        let g = oracle.noisy_grad(t, &state.x, rng);
        reports.push(momentum_step(&mut state, t, &g, eta)?);
    }
    ledger.set_final_x(state.x);
    Ok(RunOutput { ledger, reports })
}

/// Drive static time-smoothed SGD at a fixed rate.
pub fn run_sts(
    oracle: &dyn LossOracle,
    steps: usize,
    window: usize,
    eta: f64,
    x0: Vec<f64>,
    rng: &mut dyn RngCore,
) -> Result<RunOutput> {
    let mut state = StsState::new(x0, window)?;
    let mut ledger = RegretLedger::new(oracle.dim());
    let mut reports = Vec::with_capacity(steps);
    for t in 1..=steps as i64 {
        record(&mut ledger, oracle, t, &state.x)?;
        reports.push(sts_sgd_step(&mut state, oracle, t, eta, rng)?);
    }
    ledger.set_final_x(state.x);
    Ok(RunOutput { ledger, reports })
}

/// Drive dynamic exponentially time-smoothed SGD at a fixed rate.
pub fn run_dts(
    oracle: &dyn LossOracle,
    steps: usize,
    window: usize,
    alpha: f64,
    eta: f64,
    x0: Vec<f64>,
    rng: &mut dyn RngCore,
) -> Result<RunOutput> {
    let mut state = DtsState::new(x0, window, alpha)?;
    let mut ledger = RegretLedger::new(oracle.dim());
    let mut reports = Vec::with_capacity(steps);
    for t in 1..=steps as i64 {
        record(&mut ledger, oracle, t, &state.x)?;
        let g = oracle.noisy_grad(t, &state.x, rng);
        reports.push(dts_sgd_step(&mut state, t, &g, eta)?);
    }
    ledger.set_final_x(state.x);
    Ok(RunOutput { ledger, reports })
}

/// Optimizer state with its variant payload, as the harness carries it.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd(SgdState),
    Momentum(MomentumState),
    Sts(StsState),
    Dts(DtsState),
}

impl Optimizer {
    pub fn x(&self) -> &[f64] {
        match self {
            Optimizer::Sgd(s) => &s.x,
            Optimizer::Momentum(s) => &s.x,
            Optimizer::Sts(s) => &s.x,
            Optimizer::Dts(s) => &s.x,
        }
    }

    pub fn x_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Optimizer::Sgd(s) => &mut s.x,
            Optimizer::Momentum(s) => &mut s.x,
            Optimizer::Sts(s) => &mut s.x,
            Optimizer::Dts(s) => &mut s.x,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Optimizer::Sgd(_) => "sgd",
            Optimizer::Momentum(_) => "momentum",
            Optimizer::Sts(_) => "sts",
            Optimizer::Dts(_) => "dts",
        }
    }
}

const CHECKPOINT_MAGIC: &str = "timesmooth-checkpoint v1";

fn write_vec(out: &mut impl Write, name: &str, v: &[f64]) -> Result<()> {
    write!(out, "{name}")?;
    for x in v {
        // 17 significant digits round-trip f64 exactly.
        write!(out, " {x:.17e}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Write a versioned plain-text checkpoint of the optimizer state and the
/// caller's step counter. Values round-trip bit-exactly.
pub fn save_checkpoint(out: &mut impl Write, opt: &Optimizer, step: i64) -> Result<()> {
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    writeln!(out, "variant {}", opt.tag())?;
    writeln!(out, "step {step}")?;
    writeln!(out, "dim {}", opt.x().len())?;
    write_vec(out, "x", opt.x())?;
    match opt {
        Optimizer::Sgd(_) => {}
        Optimizer::Momentum(s) => {
            writeln!(out, "decay {:.17e}", s.decay)?;
            write_vec(out, "velocity", &s.velocity)?;
        }
        Optimizer::Sts(s) => {
            writeln!(out, "window {}", s.window)?;
        }
        Optimizer::Dts(s) => {
            writeln!(out, "window {}", s.history.capacity())?;
            writeln!(out, "alpha {:.17e}", s.history.decay())?;
            writeln!(out, "entries {}", s.history.len())?;
            for (t, g) in s.history.entries() {
                write_vec(out, &format!("g {t}"), g)?;
            }
        }
    }
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(input: &mut impl BufRead) -> Result<(Optimizer, i64)> {
    let mut lines = input.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(line))) => Ok((i + 1, line)),
            Some((i, Err(e))) => Err(Error::Format { line: i + 1, message: e.to_string() }),
            None => Err(Error::Format { line: 0, message: format!("unexpected end of checkpoint, wanted {expect}") }),
        }
    };
    let field = |line: &(usize, String), key: &str| -> Result<String> {
        line.1
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::Format { line: line.0, message: format!("expected `{key} ...`, got {:?}", line.1) })
    };
    let parse_vec = |line: &(usize, String), key: &str, dim: usize| -> Result<Vec<f64>> {
        let body = field(line, key)?;
        let v: Vec<f64> = body
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format { line: line.0, message: format!("bad float {s:?}") }))
            .collect::<Result<_>>()?;
        if v.len() != dim {
            return Err(Error::Format { line: line.0, message: format!("expected {dim} values, got {}", v.len()) });
        }
        Ok(v)
    };

    let magic = next("magic")?;
    if magic.1 != CHECKPOINT_MAGIC {
        return Err(Error::Format { line: magic.0, message: format!("unrecognized checkpoint header {:?}", magic.1) });
    }
    let variant = field(&next("variant")?, "variant")?;
    let step_line = next("step")?;
    let step: i64 = field(&step_line, "step")?
        .parse()
        .map_err(|_| Error::Format { line: step_line.0, message: "bad step index".into() })?;
    let dim_line = next("dim")?;
    let dim: usize = field(&dim_line, "dim")?
        .parse()
        .map_err(|_| Error::Format { line: dim_line.0, message: "bad dimension".into() })?;
    let x = parse_vec(&next("x")?, "x", dim)?;

    let opt = match variant.as_str() {
        "sgd" => Optimizer::Sgd(SgdState { x }),
        "momentum" => {
            let decay_line = next("decay")?;
            let decay: f64 = field(&decay_line, "decay")?
                .parse()
                .map_err(|_| Error::Format { line: decay_line.0, message: "bad decay".into() })?;
            let velocity = parse_vec(&next("velocity")?, "velocity", dim)?;
            Optimizer::Momentum(MomentumState { x, velocity, decay })
        }
        "sts" => {
            let wl = next("window")?;
            let window: usize = field(&wl, "window")?
                .parse()
                .map_err(|_| Error::Format { line: wl.0, message: "bad window".into() })?;
            Optimizer::Sts(StsState::new(x, window)?)
        }
        "dts" => {
            let wl = next("window")?;
            let window: usize = field(&wl, "window")?
                .parse()
                .map_err(|_| Error::Format { line: wl.0, message: "bad window".into() })?;
            let al = next("alpha")?;
            let alpha: f64 = field(&al, "alpha")?
                .parse()
                .map_err(|_| Error::Format { line: al.0, message: "bad alpha".into() })?;
            let el = next("entries")?;
            let n: usize = field(&el, "entries")?
                .parse()
                .map_err(|_| Error::Format { line: el.0, message: "bad entry count".into() })?;
            let mut state = DtsState::new(x, window, alpha)?;
            for _ in 0..n {
                let line = next("g")?;
                let body = field(&line, "g")?;
                let mut parts = body.split_whitespace();
                let t: i64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format { line: line.0, message: "bad history step".into() })?;
                let g: Vec<f64> = parts
                    .map(|s| s.parse::<f64>().map_err(|_| Error::Format { line: line.0, message: format!("bad float {s:?}") }))
                    .collect::<Result<_>>()?;
                if g.len() != dim {
                    return Err(Error::Format { line: line.0, message: "history entry dimension mismatch".into() });
                }
                state.history.push(t, g)?;
            }
            Optimizer::Dts(state)
        }
        other => {
            return Err(Error::Format { line: magic.0 + 1, message: format!("unknown optimizer variant {other:?}") })
        }
    };
    Ok((opt, step))
}
