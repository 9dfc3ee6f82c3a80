//! Command-line harness: run experiments, sweep grids, verify the analytic
//! guarantees, print the drift toy table, and generate synthetic data.
//!
//! Exit codes: 0 clean, 2 completed with non-finite metrics (divergence was
//! recorded, not crashed on), 1 error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use timesmooth::bounds;
use timesmooth::data::{synth_drift_demand, write_series_csv, DriftSpec};
use timesmooth::error::{Error, Result};
use timesmooth::harness::{
    emit_results, run_online_experiment, sweep, ExperimentConfig, Method, MetricsLedger,
    OutputFormat, SeriesSource, SweepPlan, TestSpan,
};
use timesmooth::model::ModelKind;
use timesmooth::regret::toy::toy_example;

#[derive(Parser)]
#[command(name = "timesmooth", version, about = "Time-smoothed online learning under concept drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one online forecasting experiment.
    Run(RunArgs),
    /// Run a grid of experiments with derived per-entry seeds.
    Sweep(SweepArgs),
    /// Check the analytic guarantees numerically and report margins.
    VerifyBounds(VerifyArgs),
    /// Print the shifting-quadratics regret comparison (exact rationals).
    ToyTable,
    /// Generate a synthetic concept-drift series as CSV.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config as JSON; omitted fields take defaults, flags below
    /// override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the eta0 / sqrt(t) schedule.
    #[arg(long)]
    no_schedule: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    momentum_decay: Option<f64>,
    /// Model: `linear`, `mlp` (hidden 32), or `mlp:<width>`.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated quantile levels, e.g. `0.1,0.5,0.9`.
    #[arg(long)]
    quantiles: Option<String>,
    /// Synthetic series length in months.
    #[arg(long)]
    months: Option<u32>,
    /// Held-out test span in months.
    #[arg(long)]
    test_months: Option<u32>,
    /// Read the series from an hourly-load CSV instead of synthesizing one.
    #[arg(long)]
    data_csv: Option<PathBuf>,
    /// Record measured wall time per update (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Write results to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan as JSON: a base config plus optional `methods`, `windows`,
    /// `etas` grids or an explicit `configs` list.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    max_parallel: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct VerifyArgs {
    /// Widen the regret check to ten seeds and the full horizon.
    #[arg(long)]
    thorough: bool,
    /// Write one JSON report per line to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    /// Drift recipe as JSON; defaults otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 18)]
    months: u32,
    #[arg(long)]
    out: PathBuf,
    /// Also write the effective drift recipe as JSON.
    #[arg(long)]
    write_spec: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind> {
    match s {
        "linear" => Ok(ModelKind::Linear),
        "mlp" => Ok(ModelKind::Mlp { hidden: 32 }),
        other => match other.strip_prefix("mlp:").and_then(|w| w.parse::<usize>().ok()) {
            Some(hidden) if hidden >= 1 => Ok(ModelKind::Mlp { hidden }),
            _ => Err(Error::Config(format!("unknown model {other:?}; use linear, mlp, or mlp:<width>"))),
        },
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn build_run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = args.method {
        config.method = m;
    }
    if let Some(w) = args.window {
        config.window = w;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(e) = args.eta0 {
        config.eta0 = e;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.no_schedule {
        config.schedule = false;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(d) = args.momentum_decay {
        config.momentum_decay = d;
    }
    if let Some(m) = &args.model {
        config.model = parse_model(m)?;
    }
    if let Some(qs) = &args.quantiles {
        config.quantiles = qs
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad quantile {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(path) = &args.data_csv {
        config.data = SeriesSource::GefcomCsv { path: path.display().to_string() };
    }
    if let Some(months) = args.months {
        match &mut config.data {
            SeriesSource::Synthetic { months: m, .. } => *m = months,
            SeriesSource::GefcomCsv { .. } => {
                return Err(Error::Config("--months only applies to synthetic data".into()))
            }
        }
    }
    if let Some(tm) = args.test_months {
        config.test_span = TestSpan::Months(tm);
    }
    if args.timing {
        config.measure_time = true;
    }
    Ok(config)
}

fn print_run_summary(ledger: &MetricsLedger) {
    let c = &ledger.config;
    println!(
        "method={} window={} alpha={} eta0={} schedule={} seed={}",
        c.method.name(),
        c.window,
        c.alpha,
        c.eta0,
        c.schedule,
        c.seed
    );
    println!("{:>5} {:>18} {:>18} {:>12}", "step", "ql_grand", "cumulative", "oracle_calls");
    for u in &ledger.updates {
        println!(
            "{:>5} {:>18.6} {:>18.6} {:>12}",
            u.step, u.ql_grand, u.cumulative_ql_grand, u.oracle_calls
        );
    }
    println!(
        "updates={} total_oracle_calls={} final_cumulative_ql_grand={:.6} skipped_windows={}",
        ledger.updates.len(),
        ledger.total_oracle_calls(),
        ledger.final_cumulative_ql_grand(),
        ledger.skipped_windows
    );
    if let Some(step) = ledger.first_nan_step {
        println!("first non-finite metrics at update {step}");
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = build_run_config(&args)?;
    let ledger = run_online_experiment(&config)?;
    print_run_summary(&ledger);
    if let Some(out) = &args.out {
        emit_results(std::slice::from_ref(&ledger), out, args.format)?;
        println!("results written to {}", out.display());
    }
    Ok(if ledger.completed_with_nan() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let plan: SweepPlan = load_json(&args.config)?;
    let configs = plan.expand();
    let max_parallel = args.max_parallel.unwrap_or(plan.max_parallel);
    let outcomes = sweep(&configs, plan.base_seed, max_parallel)?;

    let mut ledgers = Vec::new();
    let mut any_nan = false;
    let mut any_failed = false;
    println!(
        "{:>3} {:<12} {:>6} {:>7} {:>6} {:>20} {:>9}",
        "idx", "method", "window", "alpha", "eta0", "final_cumulative_ql", "first_nan"
    );
    for (i, outcome) in outcomes.iter().enumerate() {
        let c = &outcome.config;
        match (&outcome.ledger, &outcome.error) {
            (Some(ledger), _) => {
                any_nan |= ledger.completed_with_nan();
                println!(
                    "{:>3} {:<12} {:>6} {:>7} {:>6} {:>20.6} {:>9}",
                    i,
                    c.method.name(),
                    c.window,
                    c.alpha,
                    c.eta0,
                    ledger.final_cumulative_ql_grand(),
                    ledger.first_nan_step.map_or("-".to_string(), |s| s.to_string())
                );
                ledgers.push(ledger.clone());
            }
            (None, Some(err)) => {
                any_failed = true;
                eprintln!("config {i} ({}) failed: {err}", c.method.name());
            }
            (None, None) => unreachable!("outcome without ledger or error"),
        }
    }
    if let Some(out) = &args.out {
        emit_results(&ledgers, out, args.format)?;
        println!("results written to {}", out.display());
    }
    Ok(if any_failed {
        ExitCode::FAILURE
    } else if any_nan {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_verify_bounds(args: VerifyArgs) -> Result<ExitCode> {
    let reports = bounds::standard_battery(args.thorough)?;
    let mut violated = false;
    for r in &reports {
        violated |= r.violated;
        let cfg = &r.config;
        let mut detail = Vec::new();
        if let Some(w) = cfg.window {
            detail.push(format!("w={w}"));
        }
        if let Some(a) = cfg.alpha {
            detail.push(format!("alpha={a}"));
        }
        if let Some(s) = cfg.noise_std {
            detail.push(format!("sigma={s}"));
        }
        if let Some(s) = cfg.seed {
            detail.push(format!("seed={s}"));
        }
        println!(
            "{} {:<36} [{}] empirical {:.6e} vs analytic {:.6e} (margin {:.3e})",
            if r.violated { "FAIL" } else { "ok  " },
            r.bound,
            detail.join(", "),
            r.empirical,
            r.analytic,
            r.margin
        );
    }
    if let Some(out) = &args.out {
        let mut f = std::fs::File::create(out)?;
        for r in &reports {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
        println!("reports written to {}", out.display());
    }
    println!(
        "{} checks, {} violations",
        reports.len(),
        reports.iter().filter(|r| r.violated).count()
    );
    Ok(if violated { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn cmd_gen_data(args: GenDataArgs) -> Result<ExitCode> {
    let spec: DriftSpec = match &args.spec {
        Some(path) => load_json(path)?,
        None => DriftSpec::default(),
    };
    let records = synth_drift_demand(&spec, args.months)?;
    let file = std::fs::File::create(&args.out)?;
    write_series_csv(&records, file)?;
    println!("wrote {} hourly records to {}", records.len(), args.out.display());
    if let Some(path) = &args.write_spec {
        std::fs::write(path, serde_json::to_string_pretty(&spec)?)?;
        println!("drift recipe written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::VerifyBounds(args) => cmd_verify_bounds(args),
        Command::ToyTable => {
            print!("{}", toy_example());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenData(args) => cmd_gen_data(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
