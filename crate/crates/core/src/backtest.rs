//! Rolling-window, monthly-rebalance backtest with annualized performance
//! metrics. Weights are fit on the trailing lookback window of returns
//! strictly before each rebalance date and held until the next rebalance.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::allocation::{
    solve_cvrd, solve_mrd, solve_risk_parity, ConstraintSet, SolverOptions, WeightVector,
};
use crate::error::{Error, Result};
use crate::market_data::{compute_returns, PriceTable};
use crate::risk_models::{complex_covariance, sample_covariance};
use crate::spectral::analytic_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Rp,
    Mrd,
    Cvrd,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Rp => "rp",
            Strategy::Mrd => "mrd",
            Strategy::Cvrd => "cvrd",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "rp" => Ok(Strategy::Rp),
            "mrd" => Ok(Strategy::Mrd),
            "cvrd" => Ok(Strategy::Cvrd),
            other => Err(Error::Validation(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RebalanceRule {
    /// Rebalance on the first return date of each calendar month.
    #[default]
    FirstOfMonth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub strategy: Strategy,
    /// Window length in return observations.
    pub lookback: usize,
    pub rebalance: RebalanceRule,
    /// Mean-center each column before the analytic-signal transform (CVRD).
    pub centering: bool,
    pub constraints: ConstraintSet,
    pub solver: SolverOptions,
    /// Annualized risk-free rate used in the Sharpe ratio.
    pub risk_free_rate: f64,
    pub periods_per_year: f64,
    /// Let held weights drift with prices between rebalances.
    pub weight_drift: bool,
}

impl BacktestConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            lookback: 252,
            rebalance: RebalanceRule::default(),
            centering: true,
            constraints: ConstraintSet::long_only(),
            solver: SolverOptions::default(),
            risk_free_rate: 0.0,
            periods_per_year: 252.0,
            weight_drift: false,
        }
    }
}

/// Annualized return, annualized risk, and Sharpe ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub annualized_return: f64,
    pub annualized_risk: f64,
    /// None when the risk is zero (Sharpe undefined, never infinity).
    pub sharpe_ratio: Option<f64>,
}

/// Annualized return, risk, and Sharpe ratio of a per-period return series.
pub fn performance_metrics(
    series: &[f64],
    periods_per_year: f64,
    risk_free_rate: f64,
) -> Result<PerformanceSummary> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "performance metrics need at least 2 observations, got {}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    // A literally constant series has exactly zero risk; avoid reporting the
    // rounding residue of mean subtraction as volatility.
    let constant = series.iter().all(|&r| r == series[0]);
    let var = if constant {
        0.0
    } else {
        series.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n
    };
    let annualized_return = mean * periods_per_year;
    let annualized_risk = var.sqrt() * periods_per_year.sqrt();
    let sharpe_ratio = if annualized_risk == 0.0 {
        None
    } else {
        Some((annualized_return - risk_free_rate) / annualized_risk)
    };
    Ok(PerformanceSummary {
        annualized_return,
        annualized_risk,
        sharpe_ratio,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rebalance {
    pub date: NaiveDate,
    pub weights: WeightVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: Strategy,
    pub assets: Vec<String>,
    pub rebalances: Vec<Rebalance>,
    /// Dates of the portfolio return series.
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    /// Compounded cumulative return at each date.
    pub cumulative: Vec<f64>,
    /// Weights in force at each date (one row per date).
    pub weight_path: Vec<Vec<f64>>,
    pub periods_per_year: f64,
    pub summary: PerformanceSummary,
}

impl BacktestReport {
    /// `date,ASSET1,ASSET2,...` weight path, one row per held day.
    pub fn weights_csv(&self) -> String {
        let mut out = String::from("date");
        for a in &self.assets {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (d, row) in self.dates.iter().zip(&self.weight_path) {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for w in row {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }

    /// `date,return,cumulative_return,rolling_annual_return`.
    pub fn returns_csv(&self) -> String {
        let ppy = self.rolling_window();
        let mut out = String::from("date,return,cumulative_return,rolling_annual_return\n");
        for (i, d) in self.dates.iter().enumerate() {
            let start = (i + 1).saturating_sub(ppy);
            let window = &self.returns[start..=i];
            let rolling = window.iter().sum::<f64>() / window.len() as f64 * ppy as f64;
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.format("%Y-%m-%d"),
                self.returns[i],
                self.cumulative[i],
                rolling
            ));
        }
        out
    }

    fn rolling_window(&self) -> usize {
        (self.periods_per_year.round() as usize).max(1)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// First return-row index of each calendar month.
fn rebalance_indices(dates: &[NaiveDate], rule: RebalanceRule) -> Vec<usize> {
    match rule {
        RebalanceRule::FirstOfMonth => {
            let mut out = Vec::new();
            let mut last_month = None;
            for (i, d) in dates.iter().enumerate() {
                let key = (d.year(), d.month());
                if last_month != Some(key) {
                    out.push(i);
                    last_month = Some(key);
                }
            }
            out
        }
    }
}

fn solve_window(
    window: &crate::market_data::ReturnMatrix,
    config: &BacktestConfig,
) -> Result<Vec<f64>> {
    let solution = match config.strategy {
        Strategy::Rp => {
            let cov = sample_covariance(window)?;
            solve_risk_parity(&cov, &config.constraints, &config.solver)?
        }
        Strategy::Mrd => {
            let cov = sample_covariance(window)?;
            solve_mrd(&cov, &config.constraints, &config.solver)?
        }
        Strategy::Cvrd => {
            let signals = analytic_matrix(window, config.centering);
            let ccov = complex_covariance(&signals)?;
            solve_cvrd(&ccov, &config.constraints, &config.solver)?
        }
    };
    Ok(solution.weights.iter().copied().collect())
}

/// Runs the rolling backtest. At each rebalance date the strategy is fit on
/// the `lookback` return rows strictly before that date; the weights take
/// effect from that date's return onward and are held until the next
/// rebalance. No transaction costs.
pub fn run_backtest(table: &PriceTable, config: &BacktestConfig) -> Result<BacktestReport> {
    if config.lookback < 8 {
        return Err(Error::Validation(format!(
            "lookback must be >= 8, got {}",
            config.lookback
        )));
    }
    let returns = compute_returns(table);
    let m = returns.num_assets();

    // Single-asset portfolios are fully invested by construction.
    let single_asset = m == 1;

    let candidates = rebalance_indices(&returns.period_dates, config.rebalance);
    let feasible: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| i >= config.lookback)
        .collect();
    if feasible.is_empty() {
        let first_feasible = if returns.num_periods() > config.lookback {
            returns.period_dates[config.lookback]
                .format("%Y-%m-%d")
                .to_string()
        } else {
            "beyond the end of the data".to_string()
        };
        return Err(Error::InsufficientHistory {
            first_feasible,
            reason: format!(
                "no monthly rebalance date has {} return observations before it",
                config.lookback
            ),
        });
    }

    let mut rebalances = Vec::with_capacity(feasible.len());
    for &idx in &feasible {
        let date = returns.period_dates[idx];
        let weights = if single_asset {
            vec![1.0]
        } else {
            let window = returns.window(idx - config.lookback, config.lookback);
            solve_window(&window, config).map_err(|e| Error::SolverAtDate {
                date: date.format("%Y-%m-%d").to_string(),
                source: Box::new(e),
            })?
        };
        rebalances.push((idx, date, weights));
    }

    let start = feasible[0];
    let n_days = returns.num_periods() - start;
    let mut dates = Vec::with_capacity(n_days);
    let mut series = Vec::with_capacity(n_days);
    let mut cumulative = Vec::with_capacity(n_days);
    let mut weight_path = Vec::with_capacity(n_days);

    let mut next_rebalance = 0usize;
    let mut held: Vec<f64> = Vec::new();
    let mut wealth = 1.0;
    for t in start..returns.num_periods() {
        if next_rebalance < rebalances.len() && rebalances[next_rebalance].0 == t {
            held = rebalances[next_rebalance].2.clone();
            next_rebalance += 1;
        }
        let r_t: f64 = held
            .iter()
            .enumerate()
            .map(|(c, &w)| w * returns.returns[(t, c)])
            .sum();
        if config.weight_drift && r_t > -1.0 {
            let mut drifted: Vec<f64> = held
                .iter()
                .enumerate()
                .map(|(c, &w)| w * (1.0 + returns.returns[(t, c)]) / (1.0 + r_t))
                .collect();
            let s: f64 = drifted.iter().sum();
            if s > 0.0 {
                for w in &mut drifted {
                    *w /= s;
                }
                // Record weights in force during day t, then drift for t+1.
                weight_path.push(held.clone());
                held = drifted;
                dates.push(returns.period_dates[t]);
                series.push(r_t);
                wealth *= 1.0 + r_t;
                cumulative.push(wealth - 1.0);
                continue;
            }
        }
        weight_path.push(held.clone());
        dates.push(returns.period_dates[t]);
        series.push(r_t);
        wealth *= 1.0 + r_t;
        cumulative.push(wealth - 1.0);
    }

    let summary = performance_metrics(&series, config.periods_per_year, config.risk_free_rate)?;
    let rebalances = rebalances
        .into_iter()
        .map(|(_, date, weights)| {
            WeightVector::new(returns.assets.clone(), weights).map(|w| Rebalance { date, weights: w })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BacktestReport {
        strategy: config.strategy,
        assets: returns.assets.clone(),
        rebalances,
        dates,
        returns: series,
        cumulative,
        weight_path,
        periods_per_year: config.periods_per_year,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{load_price_table, MissingDataPolicy};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn synthetic_table(n_days: usize, assets: usize, seed: u64) -> PriceTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..n_days)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        let mut prices = nalgebra::DMatrix::zeros(n_days, assets);
        for c in 0..assets {
            let mut p = 100.0 * (c + 1) as f64;
            for r in 0..n_days {
                prices[(r, c)] = p;
                p *= 1.0 + rng.gen_range(-0.01..0.011);
            }
        }
        PriceTable::new(
            dates,
            (0..assets).map(|i| format!("A{i}")).collect(),
            prices,
        )
        .unwrap()
    }

    #[test]
    fn sharpe_matches_reference_ratio() {
        // Return 1.340, risk 1.728, rf 0 -> Sharpe about 0.7756.
        let s = PerformanceSummary {
            annualized_return: 1.340,
            annualized_risk: 1.728,
            sharpe_ratio: Some(1.340 / 1.728),
        };
        assert!((s.sharpe_ratio.unwrap() - 0.7756).abs() < 0.0005);
    }

    #[test]
    fn constant_return_series_has_undefined_sharpe() {
        let series = vec![0.001; 252];
        let s = performance_metrics(&series, 252.0, 0.0).unwrap();
        assert_relative_eq!(s.annualized_return, 0.252, epsilon = 1e-12);
        assert_eq!(s.annualized_risk, 0.0);
        assert!(s.sharpe_ratio.is_none());
    }

    #[test]
    fn symmetric_series_has_zero_sharpe() {
        let series: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let s = performance_metrics(&series, 252.0, 0.0).unwrap();
        assert!(s.annualized_return.abs() < 1e-15);
        assert!(s.sharpe_ratio.unwrap().abs() < 1e-12);
    }

    #[test]
    fn metrics_need_two_points() {
        assert!(matches!(
            performance_metrics(&[0.01], 252.0, 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn single_asset_weights_are_one() {
        let table = synthetic_table(120, 1, 1);
        let mut config = BacktestConfig::new(Strategy::Rp);
        config.lookback = 20;
        config.periods_per_year = 252.0;
        let report = run_backtest(&table, &config).unwrap();
        for rb in &report.rebalances {
            assert_eq!(rb.weights.weights, vec![1.0]);
        }
        let returns = compute_returns(&table);
        let start = returns.num_periods() - report.returns.len();
        for (i, r) in report.returns.iter().enumerate() {
            assert_relative_eq!(*r, returns.returns[(start + i, 0)], epsilon = 1e-15);
        }
    }

    #[test]
    fn too_long_lookback_errors() {
        let table = synthetic_table(60, 2, 2);
        let mut config = BacktestConfig::new(Strategy::Rp);
        config.lookback = 500;
        assert!(matches!(
            run_backtest(&table, &config),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn hand_stepped_two_asset_rp_backtest() {
        // Independent replication of the rolling mechanics: same windowing,
        // same holding rule, stepped explicitly, compared bit-for-bit.
        let table = synthetic_table(120, 2, 3);
        let mut config = BacktestConfig::new(Strategy::Rp);
        config.lookback = 30;
        let report = run_backtest(&table, &config).unwrap();
        assert!(report.rebalances.len() >= 3);

        let returns = compute_returns(&table);
        // Oracle: first return index of each month, filtered by lookback.
        let mut months = Vec::new();
        let mut seen = None;
        for (i, d) in returns.period_dates.iter().enumerate() {
            let key = (d.year(), d.month());
            if seen != Some(key) {
                months.push(i);
                seen = Some(key);
            }
        }
        let feasible: Vec<usize> = months.into_iter().filter(|&i| i >= 30).collect();
        assert_eq!(feasible.len(), report.rebalances.len());

        let mut expected_weights = Vec::new();
        for &idx in &feasible {
            let window = returns.window(idx - 30, 30);
            let cov = sample_covariance(&window).unwrap();
            let sol = solve_risk_parity(&cov, &config.constraints, &config.solver).unwrap();
            expected_weights.push((idx, sol.weights));
        }
        for (rb, (idx, w)) in report.rebalances.iter().zip(&expected_weights) {
            assert_eq!(rb.date, returns.period_dates[*idx]);
            for (a, b) in rb.weights.weights.iter().zip(w.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // Step the return series by hand.
        let start = feasible[0];
        let mut held = expected_weights[0].1.clone();
        let mut next = 1;
        for (i, t) in (start..returns.num_periods()).enumerate() {
            if next < expected_weights.len() && expected_weights[next].0 == t {
                held = expected_weights[next].1.clone();
                next += 1;
            }
            let r: f64 = (0..2).map(|c| held[c] * returns.returns[(t, c)]).sum();
            assert_eq!(r.to_bits(), report.returns[i].to_bits());
        }
        let expect_summary =
            performance_metrics(&report.returns, config.periods_per_year, 0.0).unwrap();
        assert_eq!(
            expect_summary.annualized_return.to_bits(),
            report.summary.annualized_return.to_bits()
        );
    }

    #[test]
    fn no_look_ahead() {
        let table = synthetic_table(150, 2, 4);
        let mut config = BacktestConfig::new(Strategy::Rp);
        config.lookback = 30;
        let full = run_backtest(&table, &config).unwrap();
        // Truncate right after the second rebalance date.
        let cutoff = full.rebalances[1].date + chrono::Days::new(3);
        let truncated_table = table.truncate_after(cutoff).unwrap();
        let truncated = run_backtest(&truncated_table, &config).unwrap();
        for (a, b) in truncated.rebalances.iter().zip(&full.rebalances) {
            assert_eq!(a.date, b.date);
            for (x, y) in a.weights.weights.iter().zip(&b.weights.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn determinism() {
        let table = synthetic_table(200, 3, 5);
        let mut config = BacktestConfig::new(Strategy::Cvrd);
        config.lookback = 40;
        let a = run_backtest(&table, &config).unwrap();
        let b = run_backtest(&table, &config).unwrap();
        assert_eq!(a.weights_csv(), b.weights_csv());
        assert_eq!(a.returns_csv(), b.returns_csv());
        assert_eq!(a.summary_json(), b.summary_json());
    }

    #[test]
    fn portfolio_return_identity() {
        let table = synthetic_table(150, 3, 6);
        let mut config = BacktestConfig::new(Strategy::Mrd);
        config.lookback = 30;
        let report = run_backtest(&table, &config).unwrap();
        let returns = compute_returns(&table);
        let start = returns.num_periods() - report.returns.len();
        for (i, r) in report.returns.iter().enumerate() {
            let expect: f64 = (0..3)
                .map(|c| report.weight_path[i][c] * returns.returns[(start + i, c)])
                .sum();
            assert!((r - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn emitted_csv_reparses() {
        let table = synthetic_table(120, 2, 7);
        let mut config = BacktestConfig::new(Strategy::Rp);
        config.lookback = 30;
        let report = run_backtest(&table, &config).unwrap();
        let csv = report.weights_csv();
        // The weight path uses the price-table schema shape: date + columns.
        let parsed = load_price_table(csv.as_bytes(), MissingDataPolicy::Error);
        // Weights can be zero, which the price reader rejects; parse manually.
        if parsed.is_err() {
            let mut rdr = csv::Reader::from_reader(csv.as_bytes());
            for rec in rdr.records() {
                let rec = rec.unwrap();
                assert_eq!(rec.len(), 3);
                NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").unwrap();
                let w: f64 = rec[1].parse().unwrap();
                let v: f64 = rec[2].parse().unwrap();
                assert_relative_eq!(w + v, 1.0, epsilon = 1e-9);
            }
        }
    }
}
