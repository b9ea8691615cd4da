//! Price-table ingestion, return computation, and descriptive statistics.
//!
//! Prices arrive as CSV with a `date` column followed by one column per
//! asset. Returns are simple returns r_t = (p_{t+1} - p_t) / p_t.

use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to handle missing cells in the input CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingDataPolicy {
    /// Replace an empty cell with the previous row's value for that asset.
    #[default]
    ForwardFill,
    /// Drop any row containing a missing cell.
    DropRow,
    /// Treat any missing cell as an ingestion error.
    Error,
}

/// What ingestion repaired or dropped, for audit.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    /// (row index in the sorted table, asset id) pairs that were forward-filled.
    pub filled_cells: Vec<(usize, String)>,
    /// Dates of rows dropped under the drop-row policy.
    pub dropped_rows: Vec<NaiveDate>,
}

/// Dated matrix of strictly positive asset prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// Rows are dates, columns are assets.
    pub prices: DMatrix<f64>,
}

impl PriceTable {
    /// Validates the invariants and constructs the table.
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != assets.len() {
            return Err(Error::DimensionMismatch(format!(
                "prices is {}x{} but have {} dates and {} assets",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                assets.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData(
                "price table needs at least 2 rows".into(),
            ));
        }
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Validation(format!(
                    "dates not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        for (i, a) in assets.iter().enumerate() {
            if assets[..i].contains(a) {
                return Err(Error::Validation(format!("duplicate asset identifier {a}")));
            }
        }
        for r in 0..prices.nrows() {
            for c in 0..prices.ncols() {
                let p = prices[(r, c)];
                if !p.is_finite() || p <= 0.0 {
                    return Err(Error::Validation(format!(
                        "non-positive or non-finite price {p} at date {} asset {}",
                        dates[r], assets[c]
                    )));
                }
            }
        }
        Ok(Self {
            dates,
            assets,
            prices,
        })
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn num_rows(&self) -> usize {
        self.dates.len()
    }

    /// Writes the table back out in the ingestion CSV schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header)?;
        for (r, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            for c in 0..self.assets.len() {
                rec.push(format!("{}", self.prices[(r, c)]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Truncates the table to rows with date <= cutoff.
    pub fn truncate_after(&self, cutoff: NaiveDate) -> Result<PriceTable> {
        let n = self.dates.iter().take_while(|d| **d <= cutoff).count();
        PriceTable::new(
            self.dates[..n].to_vec(),
            self.assets.clone(),
            self.prices.rows(0, n).into_owned(),
        )
    }
}

/// Per-asset simple-return series over a window of the price table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub assets: Vec<String>,
    /// Row t holds the return realized at `period_dates[t]`.
    pub returns: DMatrix<f64>,
    pub period_dates: Vec<NaiveDate>,
}

impl ReturnMatrix {
    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn num_periods(&self) -> usize {
        self.period_dates.len()
    }

    /// View of rows [start, start+len).
    pub fn window(&self, start: usize, len: usize) -> ReturnMatrix {
        ReturnMatrix {
            assets: self.assets.clone(),
            returns: self.returns.rows(start, len).into_owned(),
            period_dates: self.period_dates[start..start + len].to_vec(),
        }
    }
}

/// Kurtosis convention for descriptive statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KurtosisConvention {
    /// Fourth standardized moment (normal = 3).
    #[default]
    NonExcess,
    /// Fourth standardized moment minus 3 (normal = 0).
    Excess,
}

/// Descriptive statistics for one asset's return series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssetStat {
    pub asset: String,
    pub mean: f64,
    /// Sample standard deviation (n-1 divisor).
    pub std_dev: f64,
    /// NaN when the series is constant.
    pub skewness: f64,
    /// NaN when the series is constant.
    pub kurtosis: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssetStats {
    pub convention: KurtosisConvention,
    pub stats: Vec<AssetStat>,
}

/// Parses and validates a price CSV under the given missing-data policy.
pub fn load_price_table<R: Read>(
    source: R,
    policy: MissingDataPolicy,
) -> Result<(PriceTable, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.len() < 2 {
        return Err(Error::Validation(
            "header must be `date,ASSET1,...` with at least one asset".into(),
        ));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let m = assets.len();

    // Cells are parsed as Option<f64>; None marks a missing value.
    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 2; // 1-based, counting the header
        if record.len() != m + 1 {
            return Err(Error::Ingestion {
                row: row_no,
                column: "<record>".into(),
                message: format!("expected {} fields, got {}", m + 1, record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            Error::Ingestion {
                row: row_no,
                column: "date".into(),
                message: format!("unparsable date {:?}: {e}", &record[0]),
            }
        })?;
        let mut cells = Vec::with_capacity(m);
        for (c, field) in record.iter().skip(1).enumerate() {
            if field.is_empty() {
                cells.push(None);
            } else {
                let v: f64 = field.parse().map_err(|e| Error::Ingestion {
                    row: row_no,
                    column: assets[c].clone(),
                    message: format!("unparsable number {field:?}: {e}"),
                })?;
                cells.push(Some(v));
            }
        }
        rows.push((date, cells));
    }

    rows.sort_by_key(|(d, _)| *d);

    let mut report = IngestReport::default();
    let mut kept: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (date, cells) in rows {
        let missing = cells.iter().any(Option::is_none);
        if missing {
            match policy {
                MissingDataPolicy::Error => {
                    let c = cells.iter().position(Option::is_none).unwrap();
                    return Err(Error::Ingestion {
                        row: 0,
                        column: assets[c].clone(),
                        message: format!("missing cell at date {date}"),
                    });
                }
                MissingDataPolicy::DropRow => {
                    report.dropped_rows.push(date);
                    continue;
                }
                MissingDataPolicy::ForwardFill => {}
            }
        }
        let mut filled = Vec::with_capacity(m);
        for (c, cell) in cells.into_iter().enumerate() {
            match cell {
                Some(v) => filled.push(v),
                None => {
                    let prev = kept.last().ok_or_else(|| Error::Ingestion {
                        row: 0,
                        column: assets[c].clone(),
                        message: format!("missing cell at date {date} with no prior row to fill from"),
                    })?;
                    filled.push(prev.1[c]);
                    report.filled_cells.push((kept.len(), assets[c].clone()));
                }
            }
        }
        kept.push((date, filled));
    }

    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 price rows, got {}",
            kept.len()
        )));
    }

    let dates: Vec<NaiveDate> = kept.iter().map(|(d, _)| *d).collect();
    let prices = DMatrix::from_fn(kept.len(), m, |r, c| kept[r].1[c]);

    // Name the offending cell before the generic invariant check fires.
    for r in 0..prices.nrows() {
        for c in 0..m {
            let p = prices[(r, c)];
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Validation(format!(
                    "price must be finite and > 0, got {p} at date {} asset {}",
                    dates[r], assets[c]
                )));
            }
        }
    }

    let table = PriceTable::new(dates, assets, prices)?;
    Ok((table, report))
}

/// Simple returns: r_t = (p_{t+1} - p_t) / p_t.
pub fn compute_returns(table: &PriceTable) -> ReturnMatrix {
    let t = table.num_rows() - 1;
    let m = table.num_assets();
    let returns = DMatrix::from_fn(t, m, |r, c| {
        (table.prices[(r + 1, c)] - table.prices[(r, c)]) / table.prices[(r, c)]
    });
    ReturnMatrix {
        assets: table.assets.clone(),
        returns,
        period_dates: table.dates[1..].to_vec(),
    }
}

/// Per-asset mean, standard deviation, skewness, and kurtosis.
pub fn describe(returns: &ReturnMatrix, convention: KurtosisConvention) -> Result<AssetStats> {
    let n = returns.num_periods();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "descriptive statistics need at least 4 return rows, got {n}"
        )));
    }
    let nf = n as f64;
    let mut stats = Vec::with_capacity(returns.num_assets());
    for c in 0..returns.num_assets() {
        let col = returns.returns.column(c);
        let mean = col.sum() / nf;
        let m2 = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        let m3 = col.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
        let m4 = col.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        let std_dev = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        let (skewness, kurtosis) = if m2 == 0.0 {
            (f64::NAN, f64::NAN)
        } else {
            let k = m4 / (m2 * m2);
            let k = match convention {
                KurtosisConvention::NonExcess => k,
                KurtosisConvention::Excess => k - 3.0,
            };
            (m3 / m2.powf(1.5), k)
        };
        stats.push(AssetStat {
            asset: returns.assets[c].clone(),
            mean,
            std_dev,
            skewness,
            kurtosis,
        });
    }
    Ok(AssetStats { convention, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_from(csv: &str) -> (PriceTable, IngestReport) {
        load_price_table(csv.as_bytes(), MissingDataPolicy::ForwardFill).unwrap()
    }

    #[test]
    fn clean_three_row_parse() {
        let (t, rep) = table_from("date,A,B\n2020-01-01,100,1\n2020-01-02,110,2\n2020-01-03,99,3\n");
        assert_eq!(t.num_rows(), 3);
        assert_eq!(t.num_assets(), 2);
        assert!(rep.filled_cells.is_empty());
        assert_eq!(t.prices[(1, 0)], 110.0);
    }

    #[test]
    fn forward_fill_replaces_empty_cell() {
        let (t, rep) = table_from("date,A,B\n2020-01-01,100,1\n2020-01-02,,2\n2020-01-03,99,3\n");
        assert_eq!(t.prices[(1, 0)], 100.0);
        assert_eq!(rep.filled_cells, vec![(1, "A".to_string())]);
    }

    #[test]
    fn drop_row_policy_drops_and_reports() {
        let csv = "date,A\n2020-01-01,100\n2020-01-02,\n2020-01-03,99\n";
        let (t, rep) = load_price_table(csv.as_bytes(), MissingDataPolicy::DropRow).unwrap();
        assert_eq!(t.num_rows(), 2);
        assert_eq!(rep.dropped_rows.len(), 1);
    }

    #[test]
    fn zero_price_names_the_cell() {
        let err = load_price_table(
            "date,A,B\n2020-01-01,100,1\n2020-01-02,0.0,2\n".as_bytes(),
            MissingDataPolicy::ForwardFill,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2020-01-02") && msg.contains('A'), "{msg}");
    }

    #[test]
    fn unparsable_number_names_row_and_column() {
        let err = load_price_table(
            "date,A\n2020-01-01,100\n2020-01-02,abc\n".as_bytes(),
            MissingDataPolicy::ForwardFill,
        )
        .unwrap_err();
        match err {
            Error::Ingestion { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "A");
            }
            other => panic!("expected ingestion error, got {other}"),
        }
    }

    #[test]
    fn single_row_is_insufficient() {
        let err = load_price_table(
            "date,A\n2020-01-01,100\n".as_bytes(),
            MissingDataPolicy::ForwardFill,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn rows_sorted_by_date() {
        let (t, _) = table_from("date,A\n2020-01-03,99\n2020-01-01,100\n2020-01-02,110\n");
        assert!(t.dates.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.prices[(0, 0)], 100.0);
    }

    #[test]
    fn returns_match_hand_arithmetic() {
        let (t, _) = table_from("date,A\n2020-01-01,100\n2020-01-02,110\n2020-01-03,99\n");
        let r = compute_returns(&t);
        assert_relative_eq!(r.returns[(0, 0)], 0.10, max_relative = 1e-12);
        assert_relative_eq!(r.returns[(1, 0)], -0.10, max_relative = 1e-12);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let (t, _) = table_from("date,A\n2020-01-01,5\n2020-01-02,5\n2020-01-03,5\n");
        let r = compute_returns(&t);
        assert!(r.returns.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn alternating_prices() {
        let (t, _) =
            table_from("date,A\n2020-01-01,1\n2020-01-02,2\n2020-01-03,1\n2020-01-04,2\n");
        let r = compute_returns(&t);
        assert_eq!(r.returns.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -0.5, 1.0]);
    }

    #[test]
    fn describe_degenerate_column() {
        let (t, _) =
            table_from("date,A\n2020-01-01,5\n2020-01-02,5\n2020-01-03,5\n2020-01-04,5\n2020-01-05,5\n");
        let r = compute_returns(&t);
        let s = describe(&r, KurtosisConvention::NonExcess).unwrap();
        assert_eq!(s.stats[0].mean, 0.0);
        assert_eq!(s.stats[0].std_dev, 0.0);
        assert!(s.stats[0].skewness.is_nan());
        assert!(s.stats[0].kurtosis.is_nan());
    }

    #[test]
    fn describe_symmetric_series() {
        // returns +1, -0.5, +1, -0.5 is not symmetric; build one that is.
        let rm = ReturnMatrix {
            assets: vec!["A".into()],
            returns: DMatrix::from_column_slice(4, 1, &[0.02, -0.02, 0.02, -0.02]),
            period_dates: (1..=4)
                .map(|d| NaiveDate::from_ymd_opt(2020, 1, d).unwrap())
                .collect(),
        };
        let s = describe(&rm, KurtosisConvention::NonExcess).unwrap();
        assert_relative_eq!(s.stats[0].mean, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.stats[0].skewness, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn describe_matches_hand_computed_moments() {
        // Six values; expected moments computed by direct summation:
        // x = [0.01, -0.02, 0.03, 0.00, -0.01, 0.02], mean = 0.005
        // m2 = sum((x-mu)^2)/6, m3, m4 likewise; std uses n-1.
        let x = [0.01, -0.02, 0.03, 0.00, -0.01, 0.02];
        let rm = ReturnMatrix {
            assets: vec!["A".into()],
            returns: DMatrix::from_column_slice(6, 1, &x),
            period_dates: (1..=6)
                .map(|d| NaiveDate::from_ymd_opt(2020, 1, d).unwrap())
                .collect(),
        };
        let s = describe(&rm, KurtosisConvention::NonExcess).unwrap();
        let mu = x.iter().sum::<f64>() / 6.0;
        let m2 = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 6.0;
        let m3 = x.iter().map(|v| (v - mu).powi(3)).sum::<f64>() / 6.0;
        let m4 = x.iter().map(|v| (v - mu).powi(4)).sum::<f64>() / 6.0;
        let std = (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert_relative_eq!(s.stats[0].mean, mu, epsilon = 1e-12);
        assert_relative_eq!(s.stats[0].std_dev, std, epsilon = 1e-12);
        assert_relative_eq!(s.stats[0].skewness, m3 / m2.powf(1.5), epsilon = 1e-12);
        assert_relative_eq!(s.stats[0].kurtosis, m4 / (m2 * m2), epsilon = 1e-12);
    }

    #[test]
    fn describe_needs_four_rows() {
        let (t, _) = table_from("date,A\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n");
        let r = compute_returns(&t);
        assert!(matches!(
            describe(&r, KurtosisConvention::NonExcess),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (t, _) = table_from(
            "date,A,B\n2020-01-01,100.125,1.0000001\n2020-01-02,110.5,2.25\n2020-01-03,99.875,3.5\n",
        );
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let (t2, _) = load_price_table(buf.as_slice(), MissingDataPolicy::Error).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn return_scale_invariance() {
        let (t, _) = table_from("date,A\n2020-01-01,3\n2020-01-02,7\n2020-01-03,2\n");
        let r1 = compute_returns(&t);
        let scaled = PriceTable::new(
            t.dates.clone(),
            t.assets.clone(),
            t.prices.map(|p| p * 17.5),
        )
        .unwrap();
        let r2 = compute_returns(&scaled);
        for (a, b) in r1.returns.iter().zip(r2.returns.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn return_identity_reconstructs_prices() {
        let (t, _) = table_from("date,A,B\n2020-01-01,3.1,9\n2020-01-02,7.2,8\n2020-01-03,2.4,7\n");
        let r = compute_returns(&t);
        for row in 0..r.num_periods() {
            for c in 0..t.num_assets() {
                let lhs = (1.0 + r.returns[(row, c)]) * t.prices[(row, c)];
                assert_relative_eq!(lhs, t.prices[(row + 1, c)], max_relative = 1e-12);
            }
        }
    }
}
