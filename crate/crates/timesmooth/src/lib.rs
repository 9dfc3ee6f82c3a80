//! Online non-convex optimization under concept drift.
//!
//! When the data-generating process moves over time, a model trained online
//! should be judged — and driven — by gradients evaluated where the model
//! actually was, not where it ended up. This crate implements that idea end
//! to end:
//!
//! - [`optim`] — the update rules: plain online SGD, momentum SGD,
//!   static time-smoothed SGD (re-evaluates a window of past losses at the
//!   current parameters), dynamic exponentially time-smoothed SGD (averages
//!   stored historical gradients with exponential weights), and offline
//!   retraining from scratch.
//! - [`regret`] — standard regret, static local regret, dynamic local
//!   regret, and the calibration-gap identity, plus an exact-rational
//!   reproduction of the shifting-quadratics toy comparison.
//! - [`bounds`] — closed forms and numerical verifiers for the variance,
//!   smoothed-loss-difference, and cumulative-regret guarantees that justify
//!   the dynamic update rule.
//! - [`losses`] — time-indexed loss families (quadratic, sinusoid, with
//!   optional Gaussian gradient noise) and the quantile (pinball) loss.
//! - [`model`] — desk-scale quantile forecasters (linear and one-hidden-layer
//!   tanh) over a 48-hour x 44-feature calendar encoding, with analytic
//!   gradients and finite-difference checking.
//! - [`data`] — hourly load CSV ingestion, monthly streaming, train/test
//!   protocol splits, and a synthetic concept-drift generator.
//! - [`harness`] — the experiment runner: monthly online updates, the
//!   grand quantile-loss metric, deterministic hyperparameter sweeps, and
//!   CSV/JSON result emission.
//!
//! # Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release -p timesmooth --example toy_table            # regret comparison on the drift toy
//! cargo run --release -p timesmooth --example momentum_equivalence # DTS == momentum when w >= T
//! cargo run --release -p timesmooth --example regret_bound         # regret bound on sinusoid runs
//! cargo run --release -p timesmooth --example variance_check       # Monte Carlo variance bound
//! cargo run --release -p timesmooth --example gradient_check       # finite-difference gradient audit
//! cargo run --release -p timesmooth --example drift_run            # one online forecasting experiment
//! cargo run --release -p timesmooth --example lr_sweep             # learning-rate stability sweep
//! cargo run --release -p timesmooth --example gefcom_roundtrip     # CSV ingestion and monthly streaming
//! ```
//!
//! The same functionality is scriptable through the `timesmooth` binary
//! (`run`, `sweep`, `verify-bounds`, `toy-table`, `gen-data`); see the
//! repository README.

// Guards are written `!(x > 0.0)` rather than `x <= 0.0` on purpose: the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod optim;
pub mod regret;
pub mod seeding;

pub use error::{Error, Result};
pub use losses::{LossOracle, SmoothnessMeta};
