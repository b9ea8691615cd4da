mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cvrd_core::allocation::{
    solve_cvrd, solve_mrd, solve_risk_parity, ConstraintSet, SolverOptions, WeightVector,
};
use cvrd_core::backtest::{run_backtest, BacktestConfig, RebalanceRule, Strategy};
use cvrd_core::market_data::{
    compute_returns, describe, load_price_table, KurtosisConvention, MissingDataPolicy,
};
use cvrd_core::risk_models::{complex_covariance, sample_covariance};
use cvrd_core::spectral::analytic_matrix;

/// Portfolio construction and backtesting: risk parity, maximum risk
/// diversification, and complex valued risk diversification.
#[derive(Parser)]
#[command(name = "cvrd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-asset descriptive statistics of the return series.
    Describe {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve portfolio weights on a single window of returns.
    Weights {
        #[command(flatten)]
        common: CommonArgs,
        /// Window selector: `all` or `last-N`.
        #[arg(long, default_value = "last-252")]
        window: String,
    },
    /// Run the rolling monthly-rebalance backtest and emit report artifacts.
    Backtest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the built-in numerical sanity checks.
    Selftest,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Price CSV: header `date,ASSET1,...`, ISO-8601 dates.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated strategies from {rp, mrd, cvrd}.
    #[arg(long)]
    strategy: Option<String>,
    /// Lookback window length in return observations.
    #[arg(long)]
    lookback: Option<usize>,
    /// Rebalance rule (only `monthly` is supported).
    #[arg(long)]
    rebalance: Option<String>,
    /// Mean-center columns before the analytic-signal transform.
    #[arg(long, value_parser = parse_on_off)]
    centering: Option<bool>,
    /// Annualized risk-free rate.
    #[arg(long)]
    rf: Option<f64>,
    #[arg(long)]
    periods_per_year: Option<f64>,
    /// Seed for solver multi-starts.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (backtest) or file (weights/describe).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for stdout emission.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Missing-cell policy: forward-fill, drop-row, or error.
    #[arg(long)]
    missing_policy: Option<String>,
    /// Optional TOML config file; CLI flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("expected on|off, got {other:?}")),
    }
}

/// Values loadable from a TOML config file; flags override these, and these
/// override the built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    strategy: Option<Vec<String>>,
    lookback: Option<usize>,
    rebalance: Option<String>,
    centering: Option<bool>,
    rf: Option<f64>,
    periods_per_year: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<String>,
    missing_policy: Option<String>,
}

#[derive(Debug, Clone)]
struct RunConfig {
    input: PathBuf,
    strategies: Vec<Strategy>,
    lookback: usize,
    rebalance: RebalanceRule,
    centering: bool,
    rf: f64,
    periods_per_year: f64,
    seed: u64,
    out: Option<PathBuf>,
    format: String,
    missing_policy: MissingDataPolicy,
}

fn resolve(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let file: FileConfig = match &common.config {
        Some(path) => toml::from_str(&fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };
    let input = common
        .input
        .clone()
        .or(file.input)
        .ok_or_else(|| anyhow::anyhow!("--input is required"))?;
    let strategy_names: Vec<String> = match (&common.strategy, file.strategy) {
        (Some(s), _) => s.split(',').map(|x| x.trim().to_string()).collect(),
        (None, Some(v)) => v,
        (None, None) => vec!["cvrd".to_string()],
    };
    let mut strategies = Vec::new();
    for name in &strategy_names {
        strategies.push(name.parse::<Strategy>()?);
    }
    if strategies.is_empty() {
        anyhow::bail!("at least one strategy is required");
    }
    let rebalance = match common
        .rebalance
        .clone()
        .or(file.rebalance)
        .unwrap_or_else(|| "monthly".to_string())
        .as_str()
    {
        "monthly" => RebalanceRule::FirstOfMonth,
        other => anyhow::bail!("unknown rebalance rule {other:?} (only `monthly`)"),
    };
    let missing_policy = match common
        .missing_policy
        .clone()
        .or(file.missing_policy)
        .unwrap_or_else(|| "forward-fill".to_string())
        .as_str()
    {
        "forward-fill" => MissingDataPolicy::ForwardFill,
        "drop-row" => MissingDataPolicy::DropRow,
        "error" => MissingDataPolicy::Error,
        other => anyhow::bail!("unknown missing-data policy {other:?}"),
    };
    Ok(RunConfig {
        input,
        strategies,
        lookback: common.lookback.or(file.lookback).unwrap_or(252),
        rebalance,
        centering: common.centering.or(file.centering).unwrap_or(true),
        rf: common.rf.or(file.rf).unwrap_or(0.0),
        periods_per_year: common
            .periods_per_year
            .or(file.periods_per_year)
            .unwrap_or(252.0),
        seed: common.seed.or(file.seed).unwrap_or(42),
        out: common.out.clone().or(file.out),
        format: common
            .format
            .clone()
            .or(file.format)
            .unwrap_or_else(|| "csv".to_string()),
        missing_policy,
    })
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        seed: cfg.seed,
        ..SolverOptions::default()
    }
}

fn backtest_config(cfg: &RunConfig, strategy: Strategy) -> BacktestConfig {
    let mut c = BacktestConfig::new(strategy);
    c.lookback = cfg.lookback;
    c.rebalance = cfg.rebalance;
    c.centering = cfg.centering;
    c.solver = solver_options(cfg);
    c.risk_free_rate = cfg.rf;
    c.periods_per_year = cfg.periods_per_year;
    c
}

fn cmd_describe(cfg: &RunConfig) -> anyhow::Result<()> {
    let file = fs::File::open(&cfg.input)?;
    let (table, report) = load_price_table(file, cfg.missing_policy)?;
    if !report.filled_cells.is_empty() {
        log::info!("forward-filled {} cells", report.filled_cells.len());
    }
    if !report.dropped_rows.is_empty() {
        log::info!("dropped {} rows", report.dropped_rows.len());
    }
    let returns = compute_returns(&table);
    let stats = describe(&returns, KurtosisConvention::NonExcess)?;
    let output = if cfg.format == "json" {
        serde_json::to_string_pretty(&stats)?
    } else {
        let mut out = String::from("asset,mean,std_dev,skewness,kurtosis\n");
        for s in &stats.stats {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.asset, s.mean, s.std_dev, s.skewness, s.kurtosis
            ));
        }
        out
    };
    emit(cfg.out.as_deref(), &output)
}

fn cmd_weights(cfg: &RunConfig, window: &str) -> anyhow::Result<()> {
    let file = fs::File::open(&cfg.input)?;
    let (table, _) = load_price_table(file, cfg.missing_policy)?;
    let returns = compute_returns(&table);
    let n = returns.num_periods();
    let len = if window == "all" {
        n
    } else if let Some(k) = window.strip_prefix("last-") {
        let k: usize = k.parse()?;
        if k > n {
            anyhow::bail!("window last-{k} exceeds the {n} available return rows");
        }
        k
    } else {
        anyhow::bail!("window must be `all` or `last-N`, got {window:?}");
    };
    let w = returns.window(n - len, len);
    let constraints = ConstraintSet::long_only();
    let opts = solver_options(cfg);
    let mut output = String::new();
    for strategy in &cfg.strategies {
        let solution = match strategy {
            Strategy::Rp => solve_risk_parity(&sample_covariance(&w)?, &constraints, &opts)?,
            Strategy::Mrd => solve_mrd(&sample_covariance(&w)?, &constraints, &opts)?,
            Strategy::Cvrd => {
                let signals = analytic_matrix(&w, cfg.centering);
                solve_cvrd(&complex_covariance(&signals)?, &constraints, &opts)?
            }
        };
        let wv = WeightVector::new(
            returns.assets.clone(),
            solution.weights.iter().copied().collect(),
        )?;
        if cfg.format == "json" {
            output.push_str(&serde_json::to_string_pretty(&wv)?);
            output.push('\n');
        } else {
            if cfg.strategies.len() > 1 {
                output.push_str(&format!("# {}\n", strategy.name()));
            }
            output.push_str(&wv.to_csv());
        }
    }
    emit(cfg.out.as_deref(), &output)
}

fn cmd_backtest(cfg: &RunConfig) -> anyhow::Result<()> {
    let file = fs::File::open(&cfg.input)?;
    let (table, _) = load_price_table(file, cfg.missing_policy)?;
    let out_dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("cvrd-report"));
    fs::create_dir_all(&out_dir)?;

    let mut combined = serde_json::Map::new();
    println!("{:<10} {:>12} {:>12} {:>12}", "strategy", "return", "risk", "sharpe");
    for strategy in &cfg.strategies {
        let config = backtest_config(cfg, *strategy);
        let report = run_backtest(&table, &config)?;
        let dir = out_dir.join(strategy.name());
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("summary.json"), report.summary_json())?;
        fs::write(dir.join("weights.csv"), report.weights_csv())?;
        fs::write(dir.join("returns.csv"), report.returns_csv())?;
        let s = &report.summary;
        println!(
            "{:<10} {:>12.4} {:>12.4} {:>12}",
            strategy.name(),
            s.annualized_return,
            s.annualized_risk,
            s.sharpe_ratio
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "undefined".to_string())
        );
        combined.insert(
            strategy.name().to_string(),
            serde_json::to_value(&report.summary)?,
        );
    }
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(combined))?,
    )?;
    Ok(())
}

fn emit(out: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CVRD_LOG")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Describe { common } => resolve(common).and_then(|cfg| cmd_describe(&cfg)),
        Command::Weights { common, window } => {
            resolve(common).and_then(|cfg| cmd_weights(&cfg, window))
        }
        Command::Backtest { common } => resolve(common).and_then(|cfg| cmd_backtest(&cfg)),
        Command::Selftest => selftest::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
