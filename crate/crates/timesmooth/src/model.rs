//! Desk-scale quantile forecasting models.
//!
//! The input is two days of hourly history encoded as a 48 x 44 matrix: per
//! hour, the standardized load plus one-hot calendar features
//! (`[load | hour 0-23 | weekday, Mon=0 | month, Jan=0]`). The output is one
//! forecast per configured quantile for each horizon hour (3 x 24 by
//! default). Two model families map the flattened input to the forecast: a
//! linear map and a one-hidden-layer tanh network, both with hand-derived
//! gradients of the total quantile loss — small enough to audit coordinate
//! by coordinate with central finite differences.

use chrono::{Datelike, NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{pinball, pinball_subgradient};
use crate::optim::InitKind;

/// Hours of history per input window.
pub const HISTORY_HOURS: usize = 48;
/// Features per history hour: 1 load + 24 hour-of-day + 7 day-of-week
/// + 12 month-of-year.
pub const FEATURE_COLS: usize = 44;
/// Flattened input dimension.
pub const INPUT_DIM: usize = HISTORY_HOURS * FEATURE_COLS;
/// Default forecast horizon in hours.
pub const DEFAULT_HORIZON: usize = 24;
/// Default quantile set.
pub const DEFAULT_QUANTILES: [f64; 3] = [0.1, 0.5, 0.9];

const HOUR_OFFSET: usize = 1;
const WEEKDAY_OFFSET: usize = 1 + 24;
const MONTH_OFFSET: usize = 1 + 24 + 7;

/// Row-major 48 x 44 feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Wrap raw values; must be exactly 48 * 44 entries, row-major.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != INPUT_DIM {
            return Err(Error::Data(format!(
                "feature matrix needs {INPUT_DIM} values, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * FEATURE_COLS + col]
    }

    /// Flattened row-major view — the model input vector.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }
}

/// Frozen z-score transform for the load channel. Fit it once on the initial
/// training window and reuse it everywhere; re-fitting later would leak
/// future data into the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Mean and population standard deviation of `values`. A constant series
    /// gets scale 1, so it standardizes to exact zeros.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("cannot fit a standardizer on an empty window".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("standardizer input contains non-finite values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let scale = if std > 1e-12 { std } else { 1.0 };
        Ok(Self { mean, scale })
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, scale: 1.0 }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// Encode 48 consecutive hourly loads and their timestamps into the 48 x 44
/// input: standardized load in column 0 plus the calendar one-hots of each
/// row's timestamp.
pub fn encode_features(
    loads: &[f64],
    timestamps: &[NaiveDateTime],
    standardizer: &Standardizer,
) -> Result<FeatureMatrix> {
    if loads.len() != HISTORY_HOURS || timestamps.len() != HISTORY_HOURS {
        return Err(Error::Data(format!(
            "encoding needs exactly {HISTORY_HOURS} hourly records, got {} loads / {} timestamps",
            loads.len(),
            timestamps.len()
        )));
    }
    for pair in timestamps.windows(2) {
        if pair[1] - pair[0] != TimeDelta::hours(1) {
            return Err(Error::Data(format!(
                "timestamps must be consecutive hours: {} is not one hour after {}",
                pair[1], pair[0]
            )));
        }
    }
    if loads.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("cannot encode a window containing missing loads".into()));
    }

    let mut values = vec![0.0; INPUT_DIM];
    for (row, (&load, ts)) in loads.iter().zip(timestamps).enumerate() {
        let base = row * FEATURE_COLS;
        values[base] = standardizer.apply(load);
        values[base + HOUR_OFFSET + ts.hour() as usize] = 1.0;
        values[base + WEEKDAY_OFFSET + ts.weekday().num_days_from_monday() as usize] = 1.0;
        values[base + MONTH_OFFSET + ts.month0() as usize] = 1.0;
    }
    Ok(FeatureMatrix { values })
}

/// Forecast values for each (quantile, horizon hour), quantile-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    quantiles: Vec<f64>,
    horizon: usize,
    values: Vec<f64>,
}

impl QuantileForecast {
    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Forecast for quantile index `qi` at horizon hour `k`.
    pub fn value(&self, qi: usize, k: usize) -> f64 {
        self.values[qi * self.horizon + k]
    }

    /// All values, quantile-major.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Apply a scalar map to every entry (e.g. undo standardization).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            quantiles: self.quantiles.clone(),
            horizon: self.horizon,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Named, contiguous parameter blocks partitioning `0..total`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<(String, std::ops::Range<usize>)>,
}

impl ParamLayout {
    fn new(sizes: &[(&str, usize)]) -> Self {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for (name, len) in sizes {
            blocks.push((name.to_string(), at..at + len));
            at += len;
        }
        Self { blocks }
    }

    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |(_, r)| r.end)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&str, std::ops::Range<usize>)> {
        self.blocks.iter().map(|(n, r)| (n.as_str(), r.clone()))
    }

    pub fn range(&self, name: &str) -> Result<std::ops::Range<usize>> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.clone())
            .ok_or_else(|| Error::Config(format!("no parameter block named {name:?}")))
    }
}

/// Flat parameter vector with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(layout: ParamLayout) -> Self {
        let values = vec![0.0; layout.total()];
        Self { layout, values }
    }

    pub fn from_values(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(Error::Config(format!(
                "parameter vector has {} values but the layout expects {}",
                values.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn block(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.values[self.layout.range(name)?])
    }

    pub fn block_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let r = self.layout.range(name)?;
        Ok(&mut self.values[r])
    }
}

/// Model family: affine map or one-hidden-layer tanh network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp { hidden: usize },
}

/// A concrete model shape: family, horizon, and quantile set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    horizon: usize,
    quantiles: Vec<f64>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, horizon: usize, quantiles: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if quantiles.is_empty() {
            return Err(Error::Config("at least one quantile is required".into()));
        }
        for &q in &quantiles {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!("quantile must lie in (0, 1), got {q}")));
            }
        }
        if let ModelKind::Mlp { hidden } = kind {
            if hidden == 0 {
                return Err(Error::Config("hidden width must be at least 1".into()));
            }
        }
        Ok(Self { kind, horizon, quantiles })
    }

    /// The default 24-hour, {0.1, 0.5, 0.9} configuration.
    pub fn standard(kind: ModelKind) -> Self {
        Self::new(kind, DEFAULT_HORIZON, DEFAULT_QUANTILES.to_vec()).expect("valid defaults")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn output_dim(&self) -> usize {
        self.quantiles.len() * self.horizon
    }

    pub fn layout(&self) -> ParamLayout {
        let out = self.output_dim();
        match self.kind {
            ModelKind::Linear => {
                ParamLayout::new(&[("head_weights", out * INPUT_DIM), ("head_bias", out)])
            }
            ModelKind::Mlp { hidden } => ParamLayout::new(&[
                ("input_weights", hidden * INPUT_DIM),
                ("input_bias", hidden),
                ("head_weights", out * hidden),
                ("head_bias", out),
            ]),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total()
    }

    /// Fresh parameters. Zero works for the linear model; the tanh network
    /// needs the seeded uniform init to break symmetry.
    pub fn init_params(&self, init: InitKind) -> Vec<f64> {
        init.sample(self.param_count())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Config(format!(
                "parameter layout mismatch: got {} values, model expects {}",
                params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    /// Raw outputs (quantile-major) and, for the network, the hidden
    /// activations needed for backpropagation.
    fn forward_raw(&self, params: &[f64], input: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let out_dim = self.output_dim();
        match self.kind {
            ModelKind::Linear => {
                let (weights, bias) = params.split_at(out_dim * INPUT_DIM);
                let mut out = Vec::with_capacity(out_dim);
                for o in 0..out_dim {
                    let row = &weights[o * INPUT_DIM..(o + 1) * INPUT_DIM];
                    let mut acc = bias[o];
                    for (w, u) in row.iter().zip(input) {
                        acc += w * u;
                    }
                    out.push(acc);
                }
                (out, None)
            }
            ModelKind::Mlp { hidden } => {
                let (w1, rest) = params.split_at(hidden * INPUT_DIM);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(out_dim * hidden);
                let mut h = Vec::with_capacity(hidden);
                for m in 0..hidden {
                    let row = &w1[m * INPUT_DIM..(m + 1) * INPUT_DIM];
                    let mut acc = b1[m];
                    for (w, u) in row.iter().zip(input) {
                        acc += w * u;
                    }
                    h.push(acc.tanh());
                }
                let mut out = Vec::with_capacity(out_dim);
                for o in 0..out_dim {
                    let row = &w2[o * hidden..(o + 1) * hidden];
                    let mut acc = b2[o];
                    for (w, hm) in row.iter().zip(&h) {
                        acc += w * hm;
                    }
                    out.push(acc);
                }
                (out, Some(h))
            }
        }
    }

    /// Deterministic forward pass.
    pub fn forward(&self, params: &[f64], feats: &FeatureMatrix) -> Result<QuantileForecast> {
        self.check_params(params)?;
        let (values, _) = self.forward_raw(params, feats.as_flat());
        Ok(QuantileForecast { quantiles: self.quantiles.clone(), horizon: self.horizon, values })
    }

    /// Total quantile loss `sum_k sum_q L_q(y_k, yhat_{q,k})` and its exact
    /// gradient with respect to the flat parameters, via the chain rule
    /// through the pinball subgradient.
    pub fn loss_and_gradient(
        &self,
        params: &[f64],
        feats: &FeatureMatrix,
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        if targets.len() != self.horizon {
            return Err(Error::Data(format!(
                "need {} targets (one per horizon hour), got {}",
                self.horizon,
                targets.len()
            )));
        }
        let input = feats.as_flat();
        if params.iter().any(|v| !v.is_finite())
            || input.iter().any(|v| !v.is_finite())
            || targets.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("loss evaluation received non-finite inputs".into()));
        }

        let out_dim = self.output_dim();
        let (out, hidden) = self.forward_raw(params, input);
        let mut loss = 0.0;
        let mut g_out = vec![0.0; out_dim];
        for (qi, &q) in self.quantiles.iter().enumerate() {
            for (k, &yk) in targets.iter().enumerate() {
                let o = qi * self.horizon + k;
                loss += pinball(yk, out[o], q);
                g_out[o] = pinball_subgradient(yk, out[o], q);
            }
        }

        let mut grad = vec![0.0; params.len()];
        match self.kind {
            ModelKind::Linear => {
                let (gw, gb) = grad.split_at_mut(out_dim * INPUT_DIM);
                for o in 0..out_dim {
                    let g = g_out[o];
                    if g != 0.0 {
                        let row = &mut gw[o * INPUT_DIM..(o + 1) * INPUT_DIM];
                        for (slot, u) in row.iter_mut().zip(input) {
                            *slot = g * u;
                        }
                    }
                    gb[o] = g;
                }
            }
            ModelKind::Mlp { hidden: width } => {
                let h = hidden.expect("hidden activations");
                let w2 = &params[width * INPUT_DIM + width..width * INPUT_DIM + width + out_dim * width];
                let (gw1, rest) = grad.split_at_mut(width * INPUT_DIM);
                let (gb1, rest) = rest.split_at_mut(width);
                let (gw2, gb2) = rest.split_at_mut(out_dim * width);

                let mut d_hidden = vec![0.0; width];
                for o in 0..out_dim {
                    let g = g_out[o];
                    gb2[o] = g;
                    let row = &mut gw2[o * width..(o + 1) * width];
                    let wrow = &w2[o * width..(o + 1) * width];
                    for m in 0..width {
                        row[m] = g * h[m];
                        d_hidden[m] += g * wrow[m];
                    }
                }
                for m in 0..width {
                    let d_pre = d_hidden[m] * (1.0 - h[m] * h[m]);
                    gb1[m] = d_pre;
                    if d_pre != 0.0 {
                        let row = &mut gw1[m * INPUT_DIM..(m + 1) * INPUT_DIM];
                        for (slot, u) in row.iter_mut().zip(input) {
                            *slot = d_pre * u;
                        }
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Which coordinates a finite-difference audit covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordSelection {
    All,
    /// A seeded random subset of `count` coordinates.
    Sample { count: usize, seed: u64 },
}

/// Result of a finite-difference gradient audit.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    /// Largest guarded relative error over checked coordinates.
    pub max_rel_err: f64,
    /// Coordinate attaining it.
    pub worst_coord: Option<usize>,
    /// Coordinates compared (kink-flagged ones excluded).
    pub checked: usize,
    /// Coordinates excluded because a perturbation crossed (or landed on) a
    /// forecast-equals-target kink, where the loss is not differentiable.
    pub kink_flagged: usize,
}

/// Guarded relative error used by the audits: the denominator is floored so
/// that coordinates with near-zero gradients are compared at the scale of
/// central-difference noise instead of blowing up.
pub fn guarded_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compare the analytic quantile-loss gradient against central finite
/// differences, coordinate by coordinate. Coordinates whose perturbation
/// crosses a pinball kink are flagged and excluded (the two one-sided slopes
/// genuinely differ there).
pub fn finite_diff_check(
    spec: &ModelSpec,
    params: &[f64],
    feats: &FeatureMatrix,
    targets: &[f64],
    epsilon: f64,
    coords: CoordSelection,
) -> Result<FiniteDiffReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let (_, analytic) = spec.loss_and_gradient(params, feats, targets)?;

    let chosen: Vec<usize> = match coords {
        CoordSelection::All => (0..params.len()).collect(),
        CoordSelection::Sample { count, seed } => {
            use rand::Rng;
            let mut rng = crate::seeding::rng_for(seed, 0xfd);
            (0..count.min(params.len())).map(|_| rng.random_range(0..params.len())).collect()
        }
    };

    // Loss plus per-output residuals, for kink detection.
    let eval = |p: &[f64]| -> (f64, Vec<f64>) {
        let (out, _) = spec.forward_raw(p, feats.as_flat());
        let mut loss = 0.0;
        let mut residuals = Vec::with_capacity(out.len());
        for (qi, &q) in spec.quantiles.iter().enumerate() {
            for (k, &yk) in targets.iter().enumerate() {
                let o = qi * spec.horizon + k;
                loss += pinball(yk, out[o], q);
                residuals.push(out[o] - yk);
            }
        }
        (loss, residuals)
    };

    let mut work = params.to_vec();
    let mut report =
        FiniteDiffReport { max_rel_err: 0.0, worst_coord: None, checked: 0, kink_flagged: 0 };
    for &c in &chosen {
        let orig = work[c];
        work[c] = orig + epsilon;
        let (loss_plus, res_plus) = eval(&work);
        work[c] = orig - epsilon;
        let (loss_minus, res_minus) = eval(&work);
        work[c] = orig;

        let crossed = res_plus.iter().zip(&res_minus).any(|(p, m)| {
            p.signum() != m.signum() || p.abs() <= 1e-12 || m.abs() <= 1e-12
        });
        if crossed {
            report.kink_flagged += 1;
            continue;
        }

        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let rel = guarded_relative_error(analytic[c], numeric);
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_coord = Some(c);
        }
    }
    Ok(report)
}

/// Write a matrix as plain text: a `rows cols` header line, then one
/// row per line with 17-significant-digit values (exact f64 round-trip).
pub fn write_matrix(out: &mut impl std::io::Write, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::Data("matrix shape does not match value count".into()));
    }
    writeln!(out, "{rows} {cols}")?;
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Read a matrix written by [`write_matrix`].
pub fn read_matrix(input: impl std::io::BufRead) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = input.lines().enumerate();
    let (i, header) = match lines.next() {
        Some((i, Ok(l))) => (i + 1, l),
        _ => return Err(Error::Format { line: 1, message: "missing matrix header".into() }),
    };
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format { line: i, message: "bad row count".into() })?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format { line: i, message: "bad column count".into() })?;
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (i, line) = match lines.next() {
            Some((i, Ok(l))) => (i + 1, l),
            _ => return Err(Error::Format { line: 0, message: "matrix ended early".into() }),
        };
        for s in line.split_whitespace() {
            values.push(
                s.parse::<f64>()
                    .map_err(|_| Error::Format { line: i, message: format!("bad float {s:?}") })?,
            );
        }
    }
    if values.len() != rows * cols {
        return Err(Error::Data("matrix body does not match declared shape".into()));
    }
    Ok((rows, cols, values))
}
