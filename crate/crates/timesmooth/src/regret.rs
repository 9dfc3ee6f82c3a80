//! Regret functionals for online non-convex optimization.
//!
//! Three ways to score a parameter sequence `x_1..x_T` against losses
//! `f_1..f_T`:
//!
//! - **Standard regret** `sum_t f_t(x_t) - min_x sum_t f_t(x)`: cumulative
//!   loss against the best fixed point in hindsight.
//! - **Static local regret** `SLR_w(T) = sum_t || (1/w) sum_{i<w}
//!   grad f_{t-i}(x_t) ||^2`: a window of past gradients, all re-evaluated at
//!   the *current* parameters.
//! - **Dynamic local regret** `DLR_w(T) = sum_t || (1/W) sum_{i<w} alpha^i
//!   grad f_{t-i}(x_{t-i}) ||^2` with `W = sum_{i<w} alpha^i`: each gradient
//!   stays at its own historical parameters, exponentially down-weighted.
//!
//! Terms with `t - i <= 0` are zero (the padding convention of
//! [`crate::losses`]), and the normalizers `w` and `W` always use the full
//! window. The [`toy`] submodule evaluates all three on the shifting
//! quadratics example in exact rational arithmetic.

use crate::error::{Error, Result};
use crate::losses::LossOracle;

/// Per-step record of a run: `x_t`, `f_t(x_t)`, and the exact gradient
/// `grad f_t(x_t)`, from which every regret above can be computed.
///
/// The re-evaluation matrix `grad f_s(x_t)` needed by the static local
/// regret is expensive and optional; populate it with
/// [`RegretLedger::compute_reevaluations`] only when SLR is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    dim: usize,
    xs: Vec<Vec<f64>>,
    losses: Vec<f64>,
    grads: Vec<Vec<f64>>,
    final_x: Option<Vec<f64>>,
    reeval: Option<Reevaluations>,
}

/// `grads[t-1][i]` holds `grad f_{t-i}(x_t)` for `i = 0..window`, zero-padded
/// where `t - i <= 0`.
#[derive(Debug, Clone, PartialEq)]
struct Reevaluations {
    window: usize,
    grads: Vec<Vec<Vec<f64>>>,
}

impl RegretLedger {
    pub fn new(dim: usize) -> Self {
        Self { dim, xs: Vec::new(), losses: Vec::new(), grads: Vec::new(), final_x: None, reeval: None }
    }

    /// Append step `t = len() + 1`.
    pub fn push_step(&mut self, x: Vec<f64>, loss: f64, grad: Vec<f64>) -> Result<()> {
        if x.len() != self.dim || grad.len() != self.dim {
            return Err(Error::Data(format!(
                "ledger dimension {} does not match pushed step ({} / {})",
                self.dim,
                x.len(),
                grad.len()
            )));
        }
        self.xs.push(x);
        self.losses.push(loss);
        self.grads.push(grad);
        Ok(())
    }

    /// Record the parameters produced by the final update, `x_{T+1}`.
    pub fn set_final_x(&mut self, x: Vec<f64>) {
        self.final_x = Some(x);
    }

    /// Number of recorded steps `T`.
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `x_t`, 1-indexed; `t = T + 1` returns the final parameters if set.
    pub fn x(&self, t: usize) -> &[f64] {
        if t == self.len() + 1 {
            if let Some(fx) = &self.final_x {
                return fx;
            }
        }
        &self.xs[t - 1]
    }

    pub fn final_x(&self) -> Option<&[f64]> {
        self.final_x.as_deref()
    }

    /// `f_t(x_t)`, 1-indexed.
    pub fn loss(&self, t: usize) -> f64 {
        self.losses[t - 1]
    }

    /// `grad f_t(x_t)`, 1-indexed.
    pub fn grad(&self, t: usize) -> &[f64] {
        &self.grads[t - 1]
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.losses.iter().sum()
    }

    /// Populate the `grad f_{t-i}(x_t)` matrix for the given window by
    /// re-evaluating the oracle at every recorded step.
    pub fn compute_reevaluations(&mut self, oracle: &dyn LossOracle, window: usize) -> Result<()> {
        if window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if oracle.dim() != self.dim {
            return Err(Error::Data("oracle dimension does not match ledger".into()));
        }
        let mut grads = Vec::with_capacity(self.len());
        for t in 1..=self.len() {
            let xt = &self.xs[t - 1];
            let row: Vec<Vec<f64>> = (0..window)
                .map(|i| {
                    let s = t as i64 - i as i64;
                    if s >= 1 {
                        oracle.grad(s, xt)
                    } else {
                        vec![0.0; self.dim]
                    }
                })
                .collect();
            grads.push(row);
        }
        self.reeval = Some(Reevaluations { window, grads });
        Ok(())
    }

    /// Write the ledger as CSV with columns `t, x0..x{d-1}, f, g0..g{d-1}`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|j| format!("x{j}")));
        header.push("f".to_string());
        header.extend((0..self.dim).map(|j| format!("g{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for t in 1..=self.len() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.xs[t - 1].iter().map(|v| format!("{v:.17e}")));
            rec.push(format!("{:.17e}", self.losses[t - 1]));
            rec.extend(self.grads[t - 1].iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a ledger written by [`RegretLedger::write_csv`].
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        let cols = header.len();
        if cols < 3 || (cols - 2) % 2 != 0 {
            return Err(Error::Format { line: 1, message: "expected columns t, x.., f, g..".into() });
        }
        let dim = (cols - 2) / 2;
        let mut ledger = Self::new(dim);
        for (idx, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = idx + 2;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Format { line, message: format!("bad float {s:?}") })
            };
            let t: usize = rec[0]
                .parse()
                .map_err(|_| Error::Format { line, message: format!("bad step index {:?}", &rec[0]) })?;
            if t != idx + 1 {
                return Err(Error::Data(format!("ledger steps must be contiguous from 1, found {t} at row {line}")));
            }
            let x = (0..dim).map(|j| parse(&rec[1 + j])).collect::<Result<Vec<_>>>()?;
            let f = parse(&rec[1 + dim])?;
            let g = (0..dim).map(|j| parse(&rec[2 + dim + j])).collect::<Result<Vec<_>>>()?;
            ledger.push_step(x, f, g)?;
        }
        Ok(ledger)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

fn check_window_alpha(window: usize, alpha: f64) -> Result<()> {
    if window < 1 {
        return Err(Error::Config(format!("window must be at least 1, got {window}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Normalizer `W = sum_{i=0}^{w-1} alpha^i` over the full window.
pub fn window_normalizer(window: usize, alpha: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..window {
        total += weight;
        weight *= alpha;
    }
    total
}

/// Dynamic local regret: gradients stay at their own historical parameters,
/// weighted `alpha^i` and normalized by the full-window `W`; `alpha = 1`
/// gives the plain windowed average.
pub fn dynamic_local_regret(ledger: &RegretLedger, window: usize, alpha: f64) -> Result<f64> {
    check_window_alpha(window, alpha)?;
    let normalizer = window_normalizer(window, alpha);
    let dim = ledger.dim();
    let mut total = 0.0;
    for t in 1..=ledger.len() {
        let mut avg = vec![0.0; dim];
        let mut weight = 1.0;
        for i in 0..window {
            let s = t as i64 - i as i64;
            if s >= 1 {
                for (a, g) in avg.iter_mut().zip(ledger.grad(s as usize)) {
                    *a += weight * g;
                }
            }
            weight *= alpha;
        }
        total += avg.iter().map(|a| (a / normalizer) * (a / normalizer)).sum::<f64>();
    }
    Ok(total)
}

/// Static local regret: the window of past gradients is re-evaluated at the
/// current parameters, so the ledger must carry the re-evaluation matrix
/// (see [`RegretLedger::compute_reevaluations`]).
pub fn static_local_regret(ledger: &RegretLedger, window: usize) -> Result<f64> {
    if window < 1 {
        return Err(Error::Config(format!("window must be at least 1, got {window}")));
    }
    let reeval = ledger.reeval.as_ref().ok_or_else(|| {
        Error::Data("static local regret needs the re-evaluation matrix; call compute_reevaluations first".into())
    })?;
    if reeval.window != window {
        return Err(Error::Data(format!(
            "re-evaluation matrix was computed for window {}, requested {window}",
            reeval.window
        )));
    }
    let dim = ledger.dim();
    let mut total = 0.0;
    for row in &reeval.grads {
        let mut avg = vec![0.0; dim];
        for g in row {
            for (a, gi) in avg.iter_mut().zip(g) {
                *a += gi;
            }
        }
        total += avg.iter().map(|a| (a / window as f64) * (a / window as f64)).sum::<f64>();
    }
    Ok(total)
}

/// A comparator point and its cumulative loss, as supplied by a minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Standard regret: cumulative recorded loss minus the comparator's loss.
pub fn standard_regret(ledger: &RegretLedger, comparator: &Minimum) -> Result<f64> {
    if comparator.point.len() != ledger.dim() {
        return Err(Error::Config(format!(
            "comparator dimension {} does not match ledger dimension {}",
            comparator.point.len(),
            ledger.dim()
        )));
    }
    Ok(ledger.cumulative_loss() - comparator.value)
}

/// Exhaustive grid search over a finite box (dimension 1 or 2), stepping
/// `resolution` per axis. Ties break toward the lexicographically lowest
/// point, so a constant function returns the low corner.
pub fn grid_minimizer(
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    resolution: f64,
) -> Result<Minimum> {
    let dim = lo.len();
    if dim == 0 || dim > 2 {
        return Err(Error::Unsupported(format!("grid search supports dimension 1 or 2, got {dim}")));
    }
    if hi.len() != dim {
        return Err(Error::Config("box bounds have mismatched dimensions".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::Config(format!("resolution must be positive, got {resolution}")));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::Config("box must be finite with lo <= hi".into()));
    }

    let axis = |j: usize| -> Vec<f64> {
        let n = ((hi[j] - lo[j]) / resolution).round() as usize;
        (0..=n).map(|k| (lo[j] + k as f64 * resolution).min(hi[j])).collect()
    };

    let mut best: Option<Minimum> = None;
    let mut consider = |point: Vec<f64>, value: f64| match &best {
        Some(b) if value >= b.value => {}
        _ => best = Some(Minimum { point, value }),
    };

    match dim {
        1 => {
            for &x in &axis(0) {
                consider(vec![x], f(&[x]));
            }
        }
        _ => {
            let ys = axis(1);
            for &x in &axis(0) {
                for &y in &ys {
                    consider(vec![x, y], f(&[x, y]));
                }
            }
        }
    }
    Ok(best.expect("grid has at least one point"))
}

/// Sampled check of the identity `sup_{||u||=1} sum_s <u, grad f_s(x_s)> =
/// || sum_s grad f_s(x_s) ||` over the window `s = t-w+1 ..= t`.
///
/// Returns `(sampled_max, norm_value)`. The sampled maximum cannot exceed the
/// norm (up to rounding), and including the normalized gradient sum among the
/// directions attains it.
pub fn calibration_gap(
    ledger: &RegretLedger,
    t: usize,
    window: usize,
    directions: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if t < 1 || t > ledger.len() {
        return Err(Error::Config(format!("step {t} outside ledger of length {}", ledger.len())));
    }
    if window < 1 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let dim = ledger.dim();
    for (i, u) in directions.iter().enumerate() {
        if u.len() != dim {
            return Err(Error::Config(format!("direction {i} has dimension {}, expected {dim}", u.len())));
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("direction {i} is not unit norm ({norm})")));
        }
    }

    let mut sum = vec![0.0; dim];
    for i in 0..window {
        let s = t as i64 - i as i64;
        if s >= 1 {
            for (acc, g) in sum.iter_mut().zip(ledger.grad(s as usize)) {
                *acc += g;
            }
        }
    }
    let norm_value = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sampled_max = directions
        .iter()
        .map(|u| u.iter().zip(&sum).map(|(ui, si)| ui * si).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let sampled_max = if directions.is_empty() { 0.0 } else { sampled_max };
    Ok((sampled_max, norm_value))
}

pub mod toy {
    //! The shifting-quadratics comparison in exact rational arithmetic.
    //!
    //! Losses `f_t(x) = (x - t)^2` for `t = 1, 2, 3`; the *oracle policy*
    //! tracks the moving minimum exactly (`x = 1, 2, 3`) while the *stale
    //! policy* lags behind (`x = 1, 3/2, 2`). Cumulative loss, standard
    //! regret, and dynamic local regret all prefer the oracle policy; static
    //! local regret prefers the stale one — the failure mode that motivates
    //! the dynamic definition. All entries are exact rationals, so the table
    //! is reproduced without tolerances.

    use num_rational::Ratio;
    use num_traits::Zero;
    use std::fmt;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    /// One comparison row: a metric evaluated on both policies, plus an
    /// optional differing reference value for the stale policy (see
    /// [`ToyTable`] notes).
    #[derive(Debug, Clone, PartialEq)]
    pub struct ToyRow {
        pub metric: &'static str,
        pub oracle: Q,
        pub stale: Q,
        /// Sometimes-quoted reference value that direct evaluation of the
        /// displayed formula does not reproduce.
        pub reference_stale: Option<Q>,
        pub decision: Decision,
    }

    /// Which policy the metric prefers (lower is better).
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Decision {
        OraclePolicy,
        StalePolicy,
        Tie,
    }

    impl Decision {
        fn from_values(oracle: Q, stale: Q) -> Self {
            match oracle.cmp(&stale) {
                std::cmp::Ordering::Less => Decision::OraclePolicy,
                std::cmp::Ordering::Greater => Decision::StalePolicy,
                std::cmp::Ordering::Equal => Decision::Tie,
            }
        }
    }

    impl fmt::Display for Decision {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match self {
                Decision::OraclePolicy => write!(f, "oracle policy is better"),
                Decision::StalePolicy => write!(f, "stale policy is better"),
                Decision::Tie => write!(f, "tie"),
            }
        }
    }

    /// The full comparison table.
    #[derive(Debug, Clone, PartialEq)]
    pub struct ToyTable {
        pub rows: Vec<ToyRow>,
    }

    impl ToyTable {
        pub fn row(&self, metric: &str) -> &ToyRow {
            self.rows.iter().find(|r| r.metric == metric).expect("metric present")
        }
    }

    const CENTERS: [i64; 3] = [1, 2, 3];
    const WINDOW: usize = 3;

    fn grad(t: usize, x: Q) -> Q {
        q(2, 1) * (x - q(CENTERS[t - 1], 1))
    }

    fn loss(t: usize, x: Q) -> Q {
        let d = x - q(CENTERS[t - 1], 1);
        d * d
    }

    fn cumulative_loss(xs: &[Q; 3]) -> Q {
        (1..=3).map(|t| loss(t, xs[t - 1])).sum()
    }

    /// Dynamic local regret with `w = 3`, `alpha = 1` (other alphas do not
    /// change the comparison): each gradient at its own parameters.
    fn dlr(xs: &[Q; 3]) -> Q {
        let w = q(WINDOW as i64, 1);
        (1..=3usize)
            .map(|t| {
                let sum: Q = (0..WINDOW)
                    .filter_map(|i| t.checked_sub(i).filter(|s| *s >= 1))
                    .map(|s| grad(s, xs[s - 1]))
                    .sum();
                let avg = sum / w;
                avg * avg
            })
            .sum()
    }

    /// Static local regret with `w = 3`: the window re-evaluated at `x_t`.
    fn slr(xs: &[Q; 3]) -> Q {
        let w = q(WINDOW as i64, 1);
        (1..=3usize)
            .map(|t| {
                let sum: Q = (0..WINDOW)
                    .filter_map(|i| t.checked_sub(i).filter(|s| *s >= 1))
                    .map(|s| grad(s, xs[t - 1]))
                    .sum();
                let avg = sum / w;
                avg * avg
            })
            .sum()
    }

    /// Cumulative loss of the best fixed point: the sum of the quadratics is
    /// minimized at the mean of the centers, exactly.
    fn comparator_minimum() -> Q {
        let mean: Q = CENTERS.iter().map(|&c| q(c, 1)).sum::<Q>() / q(3, 1);
        CENTERS.iter().map(|&c| (mean - q(c, 1)) * (mean - q(c, 1))).sum()
    }

    /// Evaluate every metric on both policies.
    pub fn toy_example() -> ToyTable {
        let oracle_xs = [q(1, 1), q(2, 1), q(3, 1)];
        let stale_xs = [q(1, 1), q(3, 2), q(2, 1)];
        let comparator = comparator_minimum();

        let make = |metric, oracle: Q, stale: Q, reference_stale: Option<Q>| ToyRow {
            metric,
            oracle,
            stale,
            reference_stale,
            decision: Decision::from_values(oracle, stale),
        };

        let cum_oracle = cumulative_loss(&oracle_xs);
        let cum_stale = cumulative_loss(&stale_xs);

        ToyTable {
            rows: vec![
                make("cumulative loss", cum_oracle, cum_stale, None),
                make(
                    "standard regret",
                    cum_oracle - comparator,
                    cum_stale - comparator,
                    Some(q(-3, 8)),
                ),
                make("static local regret (w=3)", slr(&oracle_xs), slr(&stale_xs), Some(q(4, 9))),
                make("dynamic local regret (w=3, alpha=1)", dlr(&oracle_xs), dlr(&stale_xs), None),
            ],
        }
    }

    impl fmt::Display for ToyTable {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let fmt_q = |v: &Q| {
                if v.is_zero() {
                    "0".to_string()
                } else {
                    v.to_string()
                }
            };
            writeln!(f, "{:<36} {:>15} {:>15}   decision", "metric", "oracle policy", "stale policy")?;
            let mut notes = Vec::new();
            for row in &self.rows {
                let mark = if row.reference_stale.is_some() { "*" } else { "" };
                writeln!(
                    f,
                    "{:<36} {:>15} {:>14}{}   {}",
                    row.metric,
                    fmt_q(&row.oracle),
                    fmt_q(&row.stale),
                    if mark.is_empty() { " " } else { mark },
                    row.decision
                )?;
                if let Some(r) = &row.reference_stale {
                    notes.push(format!(
                        "  * {}: direct evaluation of the displayed formula gives {} for the stale \
                         policy; a commonly quoted reference table lists {} instead. The decision \
                         column is unaffected.",
                        row.metric,
                        fmt_q(&row.stale),
                        fmt_q(r)
                    ));
                }
            }
            for n in notes {
                writeln!(f, "{n}")?;
            }
            Ok(())
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn table_values_are_exact() {
            let table = toy_example();

            let cum = table.row("cumulative loss");
            assert_eq!(cum.oracle, q(0, 1));
            assert_eq!(cum.stale, q(5, 4));
            assert_eq!(cum.decision, Decision::OraclePolicy);

            let std = table.row("standard regret");
            assert_eq!(std.oracle, q(-2, 1));
            assert_eq!(std.stale, q(-3, 4));
            assert_eq!(std.reference_stale, Some(q(-3, 8)));
            assert_eq!(std.decision, Decision::OraclePolicy);

            let slr = table.row("static local regret (w=3)");
            assert_eq!(slr.oracle, q(40, 9));
            assert_eq!(slr.stale, q(0, 1));
            assert_eq!(slr.reference_stale, Some(q(4, 9)));
            assert_eq!(slr.decision, Decision::StalePolicy);

            let dlr = table.row("dynamic local regret (w=3, alpha=1)");
            assert_eq!(dlr.oracle, q(0, 1));
            assert_eq!(dlr.stale, q(10, 9));
            assert_eq!(dlr.decision, Decision::OraclePolicy);
        }

        #[test]
        fn display_prints_fractions_and_note() {
            let rendered = toy_example().to_string();
            assert!(rendered.contains("10/9"));
            assert!(rendered.contains("40/9"));
            assert!(rendered.contains("5/4"));
            assert!(rendered.contains("-3/4"));
            assert!(rendered.contains("stale policy is better"));
            assert!(rendered.contains("commonly quoted reference table"));
        }
    }
}
