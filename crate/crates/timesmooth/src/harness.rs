//! Experiment runner for online quantile forecasting under drift.
//!
//! The protocol: hourly data arrives in monthly chunks. At update `t` the
//! model takes one pass (a single epoch) over the new month's daily batches
//! — each batch a 48-hour history window forecasting the next 24 hours —
//! stepping the configured optimizer at rate `eta_t = eta0 / sqrt(t)`. The
//! offline method instead retrains from scratch on everything seen so far.
//! After every update the model forecasts the fixed held-out test span and
//! records the grand quantile loss: the mean over test months of the total
//! quantile loss in that month.
//!
//! Runs are deterministic from `(config, seed)`. A run that goes non-finite
//! is not an error: the first offending update is recorded and the run keeps
//! emitting rows (with non-finite metrics), so sweeps stay comparable and
//! divergence is a measurement rather than a crash.
//!
//! Training happens on standardized loads (z-scored against the first
//! training month); the grand quantile loss is computed on the raw scale.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use chrono::{Datelike, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, DriftSpec, HourlyRecord};
use crate::error::{Error, Result};
use crate::losses::{pinball, LossOracle, SmoothnessMeta};
use crate::model::{
    encode_features, FeatureMatrix, ModelKind, ModelSpec, QuantileForecast, Standardizer,
    DEFAULT_HORIZON, DEFAULT_QUANTILES, HISTORY_HOURS,
};
use crate::optim::{
    dts_sgd_step, lr_schedule, momentum_step, offline_retrain, sgd_step, sts_sgd_step, DtsState,
    InitKind, MomentumState, SgdState, StsState,
};
use crate::seeding;

/// Training method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SgdOnline,
    SgdOffline,
    Momentum,
    StsSgd,
    DtsSgd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SgdOnline => "sgd_online",
            Method::SgdOffline => "sgd_offline",
            Method::Momentum => "momentum",
            Method::StsSgd => "sts_sgd",
            Method::DtsSgd => "dts_sgd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd_online" | "sgd-online" | "sgd" => Ok(Method::SgdOnline),
            "sgd_offline" | "sgd-offline" | "offline" => Ok(Method::SgdOffline),
            "momentum" => Ok(Method::Momentum),
            "sts_sgd" | "sts-sgd" | "sts" => Ok(Method::StsSgd),
            "dts_sgd" | "dts-sgd" | "dts" => Ok(Method::DtsSgd),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Where the hourly series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSource {
    Synthetic { spec: DriftSpec, months: u32 },
    GefcomCsv { path: String },
}

impl SeriesSource {
    fn describe(&self) -> String {
        match self {
            SeriesSource::Synthetic { spec, months } => {
                format!("synthetic(months={months},seed={})", spec.seed)
            }
            SeriesSource::GefcomCsv { path } => format!("csv({path})"),
        }
    }
}

/// Length of the held-out test span, counted back from the series end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSpan {
    /// The full forecast window of the load protocol (Oct 2010 - Dec 2012
    /// on the competition data).
    TwentySevenMonths,
    /// The shorter "last 15 months" reading.
    FifteenMonths,
    Months(u32),
}

impl TestSpan {
    pub fn months(&self) -> u32 {
        match self {
            TestSpan::TwentySevenMonths => 27,
            TestSpan::FifteenMonths => 15,
            TestSpan::Months(n) => *n,
        }
    }
}

/// Everything a run needs; unknown-to-the-method fields are ignored but
/// echoed in the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Window `w` for the time-smoothed methods.
    pub window: usize,
    /// Exponential decay `alpha` for dynamic smoothing.
    pub alpha: f64,
    /// Base learning rate `eta0`.
    pub eta0: f64,
    /// Apply the `eta0 / sqrt(t)` schedule per monthly update.
    pub schedule: bool,
    /// Epochs per from-scratch retrain (offline method only).
    pub epochs: usize,
    /// Velocity decay for the momentum method.
    pub momentum_decay: f64,
    pub model: ModelKind,
    pub quantiles: Vec<f64>,
    pub data: SeriesSource,
    pub seed: u64,
    pub test_span: TestSpan,
    /// Record measured wall time per update. Off by default so emitted
    /// results are byte-reproducible; when off the column reads 0.
    pub measure_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::DtsSgd,
            window: 100,
            alpha: 0.99,
            eta0: 1.0,
            schedule: true,
            epochs: 3,
            momentum_decay: 0.9,
            model: ModelKind::Linear,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            data: SeriesSource::Synthetic { spec: DriftSpec::default(), months: 18 },
            seed: 0,
            test_span: TestSpan::Months(3),
            measure_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config(format!("window must be at least 1, got {}", self.window)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum_decay) {
            return Err(Error::Config(format!(
                "momentum decay must lie in [0, 1), got {}",
                self.momentum_decay
            )));
        }
        if self.test_span.months() < 1 {
            return Err(Error::Config("test span must cover at least one month".into()));
        }
        // Quantiles and model shape are validated by the model spec.
        ModelSpec::new(self.model, DEFAULT_HORIZON, self.quantiles.clone())?;
        Ok(())
    }
}

/// One monthly update's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// Update index `t`, from 1.
    pub step: usize,
    /// Mean over test months of the monthly total quantile loss.
    pub ql_grand: f64,
    /// Total quantile loss per test month, chronological.
    pub monthly_ql: Vec<f64>,
    /// Running sum of `ql_grand` through this update.
    pub cumulative_ql_grand: f64,
    /// Gradient-oracle calls spent by this update (exact).
    pub oracle_calls: u64,
    /// Measured wall time, or 0 when timing is disabled.
    pub wall_time_s: f64,
}

/// Full record of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub config: ExperimentConfig,
    pub updates: Vec<UpdateRecord>,
    /// First update whose parameters or metrics went non-finite.
    pub first_nan_step: Option<usize>,
    /// Feature windows skipped because they contained missing loads.
    pub skipped_windows: u64,
}

impl MetricsLedger {
    pub fn final_cumulative_ql_grand(&self) -> f64 {
        self.updates.last().map_or(0.0, |u| u.cumulative_ql_grand)
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.updates.iter().map(|u| u.oracle_calls).sum()
    }

    pub fn completed_with_nan(&self) -> bool {
        self.first_nan_step.is_some()
    }
}

/// Mean over test months of the monthly total quantile loss
/// `sum_points sum_k sum_q L_q`. `forecasts[m]` and `actuals[m]` hold one
/// entry per forecast creation point in month `m`; actuals are per-hour
/// target values on the same scale as the forecasts.
pub fn ql_grand(forecasts: &[Vec<QuantileForecast>], actuals: &[Vec<Vec<f64>>]) -> Result<f64> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Data(format!(
            "{} forecast months vs {} actual months",
            forecasts.len(),
            actuals.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::Data("grand quantile loss needs at least one month".into()));
    }
    let mut monthly = Vec::with_capacity(forecasts.len());
    for (m, (fs, ys)) in forecasts.iter().zip(actuals).enumerate() {
        if fs.len() != ys.len() {
            return Err(Error::Data(format!(
                "month {m}: {} forecasts vs {} actual windows",
                fs.len(),
                ys.len()
            )));
        }
        let mut total = 0.0;
        for (f, y) in fs.iter().zip(ys) {
            if f.horizon() != y.len() {
                return Err(Error::Data(format!(
                    "month {m}: forecast horizon {} vs {} actuals",
                    f.horizon(),
                    y.len()
                )));
            }
            for (qi, &q) in f.quantiles().iter().enumerate() {
                for (k, &yk) in y.iter().enumerate() {
                    total += pinball(yk, f.value(qi, k), q);
                }
            }
        }
        monthly.push(total);
    }
    Ok(monthly.iter().sum::<f64>() / monthly.len() as f64)
}

/// One daily training/evaluation window.
#[derive(Debug, Clone)]
struct Sample {
    feats: FeatureMatrix,
    targets_std: Vec<f64>,
    targets_raw: Vec<f64>,
    /// Calendar month of the forecast day.
    month: (i32, u32),
}

/// Build all daily windows over the series: creation points at midnight with
/// 48 hours of history and 24 target hours available. Windows touching a
/// missing load are skipped and counted.
fn build_samples(series: &[HourlyRecord], standardizer: &Standardizer) -> Result<(Vec<Sample>, u64)> {
    let mut samples = Vec::new();
    let mut skipped = 0u64;
    let mut c = HISTORY_HOURS;
    while c + DEFAULT_HORIZON <= series.len() {
        if series[c].timestamp.hour() != 0 {
            c += 1;
            continue;
        }
        let history = &series[c - HISTORY_HOURS..c];
        let target = &series[c..c + DEFAULT_HORIZON];
        if history.iter().chain(target).any(|r| r.load.is_none()) {
            skipped += 1;
            c += 24;
            continue;
        }
        let loads: Vec<f64> = history.iter().map(|r| r.load.unwrap()).collect();
        let stamps: Vec<NaiveDateTime> = history.iter().map(|r| r.timestamp).collect();
        let feats = encode_features(&loads, &stamps, standardizer)?;
        let targets_raw: Vec<f64> = target.iter().map(|r| r.load.unwrap()).collect();
        let targets_std: Vec<f64> = targets_raw.iter().map(|&v| standardizer.apply(v)).collect();
        let ts = series[c].timestamp;
        samples.push(Sample {
            feats,
            targets_std,
            targets_raw,
            month: (ts.year(), ts.month()),
        });
        c += 24;
    }
    Ok((samples, skipped))
}

/// Time-indexed view of recent training batches for static smoothing: loss
/// `t` is the quantile loss of batch `t` under the current parameters.
struct WindowOracle<'a> {
    spec: &'a ModelSpec,
    entries: &'a VecDeque<(i64, usize)>,
    samples: &'a [Sample],
}

impl LossOracle for WindowOracle<'_> {
    fn horizon(&self) -> usize {
        usize::MAX
    }

    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn eval(&self, t: i64, x: &[f64]) -> f64 {
        let sample = self.lookup(t).expect("availability checked by the caller");
        self.spec
            .loss_and_gradient(x, &sample.feats, &sample.targets_std)
            .map(|(loss, _)| loss)
            .unwrap_or(f64::NAN)
    }

    fn grad(&self, t: i64, x: &[f64]) -> Vec<f64> {
        let sample = self.lookup(t).expect("availability checked by the caller");
        match self.spec.loss_and_gradient(x, &sample.feats, &sample.targets_std) {
            Ok((_, g)) => g,
            // Non-finite parameters: surface as a non-finite gradient so the
            // step is refused and the run records divergence.
            Err(_) => vec![f64::NAN; self.dim()],
        }
    }

    fn meta(&self) -> SmoothnessMeta {
        SmoothnessMeta { loss_bound: None, lipschitz: None, smoothness: None, noise_std: 0.0 }
    }

    fn available(&self, t: i64) -> bool {
        self.lookup(t).is_some()
    }
}

impl WindowOracle<'_> {
    fn lookup(&self, t: i64) -> Option<&Sample> {
        self.entries
            .binary_search_by_key(&t, |(step, _)| *step)
            .ok()
            .map(|i| &self.samples[self.entries[i].1])
    }
}

/// Produce the hourly series behind a config's data source.
pub fn materialize_series(source: &SeriesSource) -> Result<Vec<HourlyRecord>> {
    match source {
        SeriesSource::Synthetic { spec, months } => data::synth_drift_demand(spec, *months),
        SeriesSource::GefcomCsv { path } => Ok(data::load_gefcom_csv(path)?.records),
    }
}

enum Driver {
    Sgd(SgdState),
    Momentum(MomentumState),
    Sts(StsState),
    Dts(DtsState),
    /// Offline retraining keeps only the parameters between updates.
    Offline(Vec<f64>),
}

impl Driver {
    fn params(&self) -> &[f64] {
        match self {
            Driver::Sgd(s) => &s.x,
            Driver::Momentum(s) => &s.x,
            Driver::Sts(s) => &s.x,
            Driver::Dts(s) => &s.x,
            Driver::Offline(x) => x,
        }
    }
}

/// Run one online experiment: stream training months, update, forecast the
/// held-out span, and record metrics per update.
pub fn run_online_experiment(config: &ExperimentConfig) -> Result<MetricsLedger> {
    config.validate()?;
    let series = materialize_series(&config.data)?;
    let boundary = data::boundary_before_end(&series, config.test_span.months())?;
    let (train, _test) = data::protocol_split(&series, boundary)?;

    let mut ledger = MetricsLedger {
        config: config.clone(),
        updates: Vec::new(),
        first_nan_step: None,
        skipped_windows: 0,
    };

    // No training months at all: an empty ledger is a clean result.
    if train.is_empty() {
        return Ok(ledger);
    }
    let first_ts = train[0].timestamp;
    let train_chunks = data::monthly_stream(train, first_ts.year(), first_ts.month())?;
    if train_chunks.is_empty() {
        return Ok(ledger);
    }

    // Load scale frozen from the initial training month; re-fitting later
    // would leak future information into the features.
    let first_loads: Vec<f64> =
        train_chunks[0].records.iter().filter_map(|r| r.load).collect();
    let standardizer = Standardizer::fit(&first_loads)
        .map_err(|_| Error::Data("first training month has no usable loads".into()))?;

    let spec = ModelSpec::new(config.model, DEFAULT_HORIZON, config.quantiles.clone())?;
    let (samples, skipped) = build_samples(&series, &standardizer)?;
    ledger.skipped_windows = skipped;

    let boundary_key = (boundary.year(), boundary.month());
    let train_months: Vec<(i32, u32)> =
        train_chunks.iter().map(|c| (c.year, c.month)).collect();
    let test_months: Vec<(i32, u32)> = {
        let mut months: Vec<(i32, u32)> =
            samples.iter().map(|s| s.month).filter(|m| *m >= boundary_key).collect();
        months.dedup();
        months
    };
    if test_months.is_empty() {
        return Err(Error::Config("test span contains no usable forecast windows".into()));
    }
    let test_sets: Vec<Vec<usize>> = test_months
        .iter()
        .map(|m| {
            (0..samples.len()).filter(|&i| samples[i].month == *m).collect()
        })
        .collect();

    let init = match config.model {
        ModelKind::Linear => InitKind::Zero,
        // Zero-init tanh networks are stuck by symmetry.
        ModelKind::Mlp { .. } => {
            InitKind::Uniform { scale: 0.1, seed: seeding::derive_seed(config.seed, 0x1217) }
        }
    };
    let dim = spec.param_count();
    let mut driver = match config.method {
        Method::SgdOnline => Driver::Sgd(SgdState { x: spec.init_params(init) }),
        Method::Momentum => {
            Driver::Momentum(MomentumState::new(spec.init_params(init), config.momentum_decay)?)
        }
        Method::StsSgd => Driver::Sts(StsState::new(spec.init_params(init), config.window)?),
        Method::DtsSgd => {
            Driver::Dts(DtsState::new(spec.init_params(init), config.window, config.alpha)?)
        }
        Method::SgdOffline => Driver::Offline(spec.init_params(init)),
    };

    let mut rng = seeding::rng_for(config.seed, 0x0b5e);
    let mut recent: VecDeque<(i64, usize)> = VecDeque::new();
    let mut seen_batches: Vec<usize> = Vec::new();
    let mut global_step: i64 = 0;
    let mut cumulative = 0.0;
    let mut diverged = false;

    for (update_idx, month) in train_months.iter().enumerate() {
        let t = update_idx + 1;
        let started = Instant::now();
        let eta_t = if config.schedule { lr_schedule(config.eta0, t as i64)? } else { config.eta0 };
        let month_batches: Vec<usize> =
            (0..samples.len()).filter(|&i| samples[i].month == *month).collect();
        let mut calls = 0u64;

        if !diverged {
            let outcome: Result<()> = (|| {
                match &mut driver {
                    Driver::Sgd(state) => {
                        for &i in &month_batches {
                            global_step += 1;
                            let s = &samples[i];
                            let (_, g) = spec.loss_and_gradient(&state.x, &s.feats, &s.targets_std)?;
                            calls += sgd_step(state, global_step, &g, eta_t)?.oracle_calls;
                        }
                    }
                    Driver::Momentum(state) => {
                        for &i in &month_batches {
                            global_step += 1;
                            let s = &samples[i];
                            let (_, g) = spec.loss_and_gradient(&state.x, &s.feats, &s.targets_std)?;
                            calls += momentum_step(state, global_step, &g, eta_t)?.oracle_calls;
                        }
                    }
                    Driver::Dts(state) => {
                        for &i in &month_batches {
                            global_step += 1;
                            let s = &samples[i];
                            let (_, g) = spec.loss_and_gradient(&state.x, &s.feats, &s.targets_std)?;
                            calls += dts_sgd_step(state, global_step, &g, eta_t)?.oracle_calls;
                        }
                    }
                    Driver::Sts(state) => {
                        // The static window re-evaluates up to `w` past
                        // batches at the current parameters; those batch
                        // references are the only past data it keeps.
                        for &i in &month_batches {
                            global_step += 1;
                            if recent.len() == config.window {
                                recent.pop_front();
                            }
                            recent.push_back((global_step, i));
                            let oracle = WindowOracle { spec: &spec, entries: &recent, samples: &samples };
                            calls +=
                                sts_sgd_step(state, &oracle, global_step, eta_t, &mut rng)?.oracle_calls;
                        }
                    }
                    Driver::Offline(params) => {
                        seen_batches.extend(month_batches.iter().copied());
                        let (trained, c) = offline_retrain(
                            dim,
                            seen_batches.len(),
                            |b, x| {
                                let s = &samples[seen_batches[b]];
                                Ok(spec.loss_and_gradient(x, &s.feats, &s.targets_std)?.1)
                            },
                            config.epochs,
                            config.eta0,
                            init,
                        )?;
                        *params = trained;
                        calls += c;
                    }
                }
                Ok(())
            })();
            match outcome {
                Ok(()) => {}
                Err(Error::Numeric(_)) => diverged = true,
                Err(e) => return Err(e),
            }
            if driver.params().iter().any(|v| !v.is_finite()) {
                diverged = true;
            }
            if diverged && ledger.first_nan_step.is_none() {
                ledger.first_nan_step = Some(t);
            }
        }

        // Forecast the held-out span with whatever parameters we have;
        // diverged parameters simply produce non-finite metrics.
        let params = driver.params();
        let mut monthly = Vec::with_capacity(test_sets.len());
        for set in &test_sets {
            let mut fs = Vec::with_capacity(set.len());
            let mut ys = Vec::with_capacity(set.len());
            for &i in set {
                let s = &samples[i];
                let raw = spec.forward(params, &s.feats)?.map(|z| standardizer.invert(z));
                fs.push(raw);
                ys.push(s.targets_raw.clone());
            }
            monthly.push(ql_grand(&[fs], &[ys])?);
        }
        let ql = monthly.iter().sum::<f64>() / monthly.len() as f64;
        if !ql.is_finite() && ledger.first_nan_step.is_none() {
            ledger.first_nan_step = Some(t);
        }
        cumulative += ql;
        ledger.updates.push(UpdateRecord {
            step: t,
            ql_grand: ql,
            monthly_ql: monthly,
            cumulative_ql_grand: cumulative,
            oracle_calls: calls,
            wall_time_s: if config.measure_time { started.elapsed().as_secs_f64() } else { 0.0 },
        });
    }
    Ok(ledger)
}

/// Outcome of one sweep entry; a failed run records its error instead of
/// aborting the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub config: ExperimentConfig,
    pub ledger: Option<MetricsLedger>,
    pub error: Option<String>,
}

/// Run every config, up to `max_parallel` at a time, each with a seed
/// derived from `(base_seed, index)`. Results keep the input order.
pub fn sweep(
    configs: &[ExperimentConfig],
    base_seed: u64,
    max_parallel: usize,
) -> Result<Vec<SweepOutcome>> {
    if configs.is_empty() {
        return Err(Error::Config("sweep needs at least one config".into()));
    }
    let threads = max_parallel.clamp(1, configs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("could not build sweep pool: {e}")))?;
    let outcomes = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, base)| {
                let mut config = base.clone();
                config.seed = seeding::derive_seed(base_seed, i as u64);
                match run_online_experiment(&config) {
                    Ok(ledger) => SweepOutcome { config, ledger: Some(ledger), error: None },
                    Err(e) => SweepOutcome { config, ledger: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    });
    Ok(outcomes)
}

/// A sweep description: either an explicit config list or a grid over
/// methods, windows, and learning rates applied to a base config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepPlan {
    pub base: ExperimentConfig,
    pub configs: Option<Vec<ExperimentConfig>>,
    pub methods: Option<Vec<Method>>,
    pub windows: Option<Vec<usize>>,
    pub etas: Option<Vec<f64>>,
    pub base_seed: u64,
    pub max_parallel: usize,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            base: ExperimentConfig::default(),
            configs: None,
            methods: None,
            windows: None,
            etas: None,
            base_seed: 0,
            max_parallel: 1,
        }
    }
}

impl SweepPlan {
    /// Expand into the concrete config list (method-major, then window,
    /// then learning rate).
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        if let Some(configs) = &self.configs {
            return configs.clone();
        }
        let methods = self.methods.clone().unwrap_or_else(|| vec![self.base.method]);
        let windows = self.windows.clone().unwrap_or_else(|| vec![self.base.window]);
        let etas = self.etas.clone().unwrap_or_else(|| vec![self.base.eta0]);
        let mut out = Vec::with_capacity(methods.len() * windows.len() * etas.len());
        for &method in &methods {
            for &window in &windows {
                for &eta0 in &etas {
                    let mut c = self.base.clone();
                    c.method = method;
                    c.window = window;
                    c.eta0 = eta0;
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Output format for emitted results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// CSV column set, one row per (config, update step). `monthly_ql` and
/// `quantiles` are `;`-joined; `config_json` carries the full config echo.
pub const RESULT_CSV_COLUMNS: [&str; 17] = [
    "config_index",
    "method",
    "model",
    "window",
    "alpha",
    "eta0",
    "schedule",
    "seed",
    "quantiles",
    "data",
    "step",
    "ql_grand",
    "cumulative_ql_grand",
    "oracle_calls",
    "wall_time_s",
    "first_nan_step",
    "monthly_ql",
];

/// Write ledgers as CSV (one row per config and update step, with a full
/// config echo per row).
pub fn write_results_csv(ledgers: &[MetricsLedger], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = RESULT_CSV_COLUMNS.to_vec();
    header.push("config_json");
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for (idx, ledger) in ledgers.iter().enumerate() {
        let c = &ledger.config;
        let config_json = serde_json::to_string(c)?;
        let model = match c.model {
            ModelKind::Linear => "linear".to_string(),
            ModelKind::Mlp { hidden } => format!("mlp({hidden})"),
        };
        let quantiles =
            c.quantiles.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(";");
        for u in &ledger.updates {
            let monthly =
                u.monthly_ql.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            let row = [
                idx.to_string(),
                c.method.name().to_string(),
                model.clone(),
                c.window.to_string(),
                c.alpha.to_string(),
                c.eta0.to_string(),
                c.schedule.to_string(),
                c.seed.to_string(),
                quantiles.clone(),
                c.data.describe(),
                u.step.to_string(),
                u.ql_grand.to_string(),
                u.cumulative_ql_grand.to_string(),
                u.oracle_calls.to_string(),
                u.wall_time_s.to_string(),
                ledger.first_nan_step.map_or(String::new(), |s| s.to_string()),
                monthly,
                config_json.clone(),
            ];
            w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write ledgers as a JSON array (full config echo and per-update records).
/// Non-finite metrics from diverged runs serialize as `null`.
pub fn write_results_json(ledgers: &[MetricsLedger], out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, ledgers)?;
    Ok(())
}

/// Emit ledgers to a file in the requested format.
pub fn emit_results(ledgers: &[MetricsLedger], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    if ledgers.is_empty() {
        return Err(Error::Config("nothing to emit: no ledgers".into()));
    }
    let file = std::fs::File::create(path.as_ref())?;
    match format {
        OutputFormat::Csv => write_results_csv(ledgers, file),
        OutputFormat::Json => write_results_json(ledgers, file),
    }
}
