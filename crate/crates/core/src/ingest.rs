//! Price ingestion and label assembly: parses daily close prices from CSV,
//! derives the return series, and attaches the solar-term dummy matrix that
//! every estimator downstream consumes.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jieqi::{TermEvent, TermWindow, TERM_COUNT};

/// Daily close prices, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub rows: Vec<(NaiveDate, f64)>,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMethod {
    Log,
    Simple,
}

impl ReturnMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ReturnMethod::Log => "log",
            ReturnMethod::Simple => "simple",
        }
    }
}

/// Daily returns in raw fractional units, dated by the later day of each
/// price pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub rows: Vec<(NaiveDate, f64)>,
    pub method: ReturnMethod,
}

impl ReturnSeries {
    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.rows.iter().map(|r| r.0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn trading_days(&self) -> BTreeSet<NaiveDate> {
        self.dates().collect()
    }
}

/// Column and format configuration for the input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvConfig {
    pub date_col: String,
    pub close_col: String,
    /// When set, the file already contains returns and price parsing is
    /// skipped.
    pub returns_col: Option<String>,
    pub date_format: String,
}

impl Default for CsvConfig {
    fn default() -> Self {
        CsvConfig {
            date_col: "date".into(),
            close_col: "close".into(),
            returns_col: None,
            date_format: "%Y-%m-%d".into(),
        }
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_date(value: &str, format: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value.trim(), format).map_err(|_| Error::BadDate {
        row,
        value: value.to_string(),
        format: format.to_string(),
    })
}

fn parse_number(value: &str, row: usize) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| Error::BadNumber {
        row,
        value: value.to_string(),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadNumber {
            row,
            value: value.to_string(),
        })
    }
}

fn check_increasing(dates: &[(NaiveDate, f64)]) -> Result<()> {
    for (i, pair) in dates.windows(2).enumerate() {
        if pair[1].0 <= pair[0].0 {
            // Row numbers are 1-based over data rows (header excluded).
            return Err(Error::UnorderedDates {
                row: i + 2,
                date: pair[1].0,
            });
        }
    }
    Ok(())
}

/// Parses a close-price CSV into a validated [`PriceSeries`].
///
/// Rejects non-positive closes and out-of-order or duplicated dates rather
/// than repairing them.
pub fn parse_price_csv(content: &[u8], cfg: &CsvConfig, source_id: &str) -> Result<PriceSeries> {
    let mut reader = csv::Reader::from_reader(content);
    let headers = reader.headers()?.clone();
    let date_idx = header_index(&headers, &cfg.date_col)?;
    let close_idx = header_index(&headers, &cfg.close_col)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let date = parse_date(&record[date_idx], &cfg.date_format, row)?;
        let close = parse_number(&record[close_idx], row)?;
        if close <= 0.0 {
            return Err(Error::NonPositivePrice { row, value: close });
        }
        rows.push((date, close));
    }
    check_increasing(&rows)?;
    Ok(PriceSeries {
        rows,
        source_id: source_id.to_string(),
    })
}

/// Parses a CSV whose `returns_col` already holds daily returns.
pub fn parse_returns_csv(content: &[u8], cfg: &CsvConfig) -> Result<ReturnSeries> {
    let returns_col = cfg
        .returns_col
        .as_deref()
        .ok_or_else(|| Error::Config("returns column not configured".into()))?;
    let mut reader = csv::Reader::from_reader(content);
    let headers = reader.headers()?.clone();
    let date_idx = header_index(&headers, &cfg.date_col)?;
    let ret_idx = header_index(&headers, returns_col)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let date = parse_date(&record[date_idx], &cfg.date_format, row)?;
        let value = parse_number(&record[ret_idx], row)?;
        rows.push((date, value));
    }
    check_increasing(&rows)?;
    Ok(ReturnSeries {
        rows,
        method: ReturnMethod::Log,
    })
}

/// Daily returns from closes: `ln(P_t/P_{t-1})` or `P_t/P_{t-1} - 1`.
pub fn compute_returns(prices: &PriceSeries, method: ReturnMethod) -> Result<ReturnSeries> {
    if prices.rows.len() < 2 {
        return Err(Error::SeriesTooShort {
            need: 2,
            got: prices.rows.len(),
        });
    }
    let rows = prices
        .rows
        .windows(2)
        .map(|pair| {
            let (_, prev) = pair[0];
            let (date, cur) = pair[1];
            let r = match method {
                ReturnMethod::Log => (cur / prev).ln(),
                ReturnMethod::Simple => cur / prev - 1.0,
            };
            (date, r)
        })
        .collect();
    Ok(ReturnSeries { rows, method })
}

/// How return rows were labeled with term dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    /// Dummy i is 1 exactly on the aligned trading day of term i.
    TermDay,
    /// Dummy i is 1 on every member day of term i's window.
    Window { radius: u32 },
}

/// Return series plus the n×24 term-dummy matrix and normal-day indicator.
#[derive(Debug, Clone)]
pub struct LabeledSeries {
    pub returns: ReturnSeries,
    /// Row-major n×24 binary matrix; column `order-1` marks term `order`.
    pub dummies: Vec<[u8; TERM_COUNT]>,
    /// 1 minus the row sum of `dummies`.
    pub normal_day: Vec<u8>,
    pub mode: LabelMode,
}

impl LabeledSeries {
    pub fn n(&self) -> usize {
        self.returns.rows.len()
    }

    /// Lagged return R_{t-1} for row `t`; absent on the first row.
    pub fn lagged_return(&self, t: usize) -> Option<f64> {
        (t > 0).then(|| self.returns.rows[t - 1].1)
    }

    pub fn dummy_column(&self, order: u8) -> Vec<f64> {
        let j = (order - 1) as usize;
        self.dummies.iter().map(|row| f64::from(row[j])).collect()
    }

    /// Count of labeled days for each term order 1..=24.
    pub fn column_counts(&self) -> [usize; TERM_COUNT] {
        let mut counts = [0usize; TERM_COUNT];
        for row in &self.dummies {
            for (j, &v) in row.iter().enumerate() {
                counts[j] += v as usize;
            }
        }
        counts
    }

    /// Indices of rows labeled with some term.
    pub fn labeled_rows(&self) -> Vec<usize> {
        self.normal_day
            .iter()
            .enumerate()
            .filter(|(_, &nd)| nd == 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Term order labeling row `t`, if any.
    pub fn row_term(&self, t: usize) -> Option<u8> {
        self.dummies[t]
            .iter()
            .position(|&v| v == 1)
            .map(|j| (j + 1) as u8)
    }
}

fn assemble(
    returns: &ReturnSeries,
    labels: Vec<(NaiveDate, u8)>,
    mode: LabelMode,
) -> Result<LabeledSeries> {
    let index: std::collections::BTreeMap<NaiveDate, usize> = returns
        .dates()
        .enumerate()
        .map(|(i, d)| (d, i))
        .collect();
    let n = returns.rows.len();
    let mut dummies = vec![[0u8; TERM_COUNT]; n];
    for (date, order) in labels {
        if let Some(&row) = index.get(&date) {
            let j = (order - 1) as usize;
            if dummies[row][j] == 0 && dummies[row].iter().any(|&v| v == 1) {
                let first = (dummies[row].iter().position(|&v| v == 1).unwrap() + 1) as u8;
                return Err(Error::WindowOverlap {
                    date,
                    first,
                    second: order,
                    radius: match mode {
                        LabelMode::Window { radius } => radius,
                        LabelMode::TermDay => 0,
                    },
                });
            }
            dummies[row][j] = 1;
        }
    }
    let normal_day = dummies
        .iter()
        .map(|row| 1 - row.iter().map(|&v| u8::from(v == 1)).max().unwrap_or(0))
        .collect();
    Ok(LabeledSeries {
        returns: returns.clone(),
        dummies,
        normal_day,
        mode,
    })
}

/// Labels each return row that is an aligned term day with that term's
/// dummy. Events lacking a `trading_day` are skipped (the exclusion rule).
pub fn build_labeled(returns: &ReturnSeries, events: &[TermEvent]) -> Result<LabeledSeries> {
    if events.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let labels = events
        .iter()
        .filter_map(|e| e.trading_day.map(|d| (d, e.term.order)))
        .collect();
    assemble(returns, labels, LabelMode::TermDay)
}

/// Labels each return row inside a term window with that term's dummy.
pub fn build_labeled_windows(
    returns: &ReturnSeries,
    windows: &[TermWindow],
) -> Result<LabeledSeries> {
    if windows.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let radius = windows[0].radius;
    let labels = windows
        .iter()
        .flat_map(|w| {
            w.member_days
                .iter()
                .map(move |&d| (d, w.event.term.order))
        })
        .collect();
    assemble(returns, labels, LabelMode::Window { radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jieqi::{self, SolarTerm};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_simple_file() {
        let csv = b"date,close\n1995-01-03,100.0\n";
        let series = parse_price_csv(csv, &CsvConfig::default(), "test").unwrap();
        assert_eq!(series.rows, vec![(date(1995, 1, 3), 100.0)]);
        assert_eq!(series.source_id, "test");
    }

    #[test]
    fn rejects_non_positive_price() {
        let csv = b"date,close\n1995-01-03,100.0\n1995-01-04,0\n";
        let err = parse_price_csv(csv, &CsvConfig::default(), "t").unwrap_err();
        assert!(matches!(
            err,
            Error::NonPositivePrice { row: 2, value } if value == 0.0
        ));
    }

    #[test]
    fn rejects_unordered_dates_naming_first_offender() {
        let csv = b"date,close\n1995-01-05,100.0\n1995-01-04,101.0\n";
        let err = parse_price_csv(csv, &CsvConfig::default(), "t").unwrap_err();
        match err {
            Error::UnorderedDates { date: d, row } => {
                assert_eq!(d, date(1995, 1, 4));
                assert_eq!(row, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_dates() {
        let csv = b"date,close\n1995-01-05,100.0\n1995-01-05,101.0\n";
        assert!(matches!(
            parse_price_csv(csv, &CsvConfig::default(), "t"),
            Err(Error::UnorderedDates { .. })
        ));
    }

    #[test]
    fn missing_column_is_named() {
        let csv = b"day,close\n1995-01-05,100.0\n";
        let err = parse_price_csv(csv, &CsvConfig::default(), "t").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(name) if name == "date"));
    }

    #[test]
    fn custom_columns_and_format() {
        let csv = b"Trade Date,Px\n03/01/1995,88.5\n";
        let cfg = CsvConfig {
            date_col: "Trade Date".into(),
            close_col: "Px".into(),
            returns_col: None,
            date_format: "%d/%m/%Y".into(),
        };
        let series = parse_price_csv(csv, &cfg, "t").unwrap();
        assert_eq!(series.rows, vec![(date(1995, 1, 3), 88.5)]);
    }

    #[test]
    fn precomputed_returns_path() {
        let csv = b"date,ret\n1995-01-03,0.01\n1995-01-04,-0.02\n";
        let cfg = CsvConfig {
            returns_col: Some("ret".into()),
            ..CsvConfig::default()
        };
        let series = parse_returns_csv(csv, &cfg).unwrap();
        assert_eq!(series.rows.len(), 2);
        assert_eq!(series.rows[1], (date(1995, 1, 4), -0.02));
    }

    #[test]
    fn log_and_simple_returns() {
        let prices = PriceSeries {
            rows: vec![(date(2000, 1, 3), 100.0), (date(2000, 1, 4), 101.0)],
            source_id: "t".into(),
        };
        let log = compute_returns(&prices, ReturnMethod::Log).unwrap();
        assert_abs_diff_eq!(log.rows[0].1, 0.009950330853155723, epsilon = 1e-12);
        assert_eq!(log.rows[0].0, date(2000, 1, 4));
        let simple = compute_returns(&prices, ReturnMethod::Simple).unwrap();
        assert_abs_diff_eq!(simple.rows[0].1, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let prices = PriceSeries {
            rows: (0..5).map(|i| (date(2000, 1, 3) + chrono::Duration::days(i), 50.0)).collect(),
            source_id: "t".into(),
        };
        for method in [ReturnMethod::Log, ReturnMethod::Simple] {
            let r = compute_returns(&prices, method).unwrap();
            assert!(r.rows.iter().all(|&(_, v)| v == 0.0));
        }
    }

    #[test]
    fn too_short_series_rejected() {
        let prices = PriceSeries {
            rows: vec![(date(2000, 1, 3), 100.0)],
            source_id: "t".into(),
        };
        assert!(matches!(
            compute_returns(&prices, ReturnMethod::Log),
            Err(Error::SeriesTooShort { need: 2, got: 1 })
        ));
    }

    fn returns_over(dates: &[NaiveDate]) -> ReturnSeries {
        ReturnSeries {
            rows: dates.iter().map(|&d| (d, 0.001)).collect(),
            method: ReturnMethod::Log,
        }
    }

    #[test]
    fn labeling_marks_term_days_and_complements_normal_days() {
        let events = jieqi::term_calendar(2000, 2000).unwrap();
        let dates: Vec<NaiveDate> = (0..366)
            .map(|i| date(2000, 1, 1) + chrono::Duration::days(i))
            .filter(|d| chrono::Datelike::weekday(d).num_days_from_monday() < 5)
            .collect();
        let trading: BTreeSet<NaiveDate> = dates.iter().copied().collect();
        let aligned = jieqi::align_terms(&events, &trading);
        let returns = returns_over(&dates);
        let labeled = build_labeled(&returns, &aligned).unwrap();

        let aligned_count = aligned.iter().filter(|e| e.trading_day.is_some()).count();
        let total: usize = labeled.column_counts().iter().sum();
        assert_eq!(total, aligned_count);
        for (row, nd) in labeled.dummies.iter().zip(labeled.normal_day.iter()) {
            let sum: u8 = row.iter().sum();
            assert!(sum <= 1);
            assert_eq!(*nd, 1 - sum);
        }
        // Column sums match per-term aligned event counts.
        for order in 1..=24u8 {
            let expected = aligned
                .iter()
                .filter(|e| e.term.order == order && e.trading_day.is_some())
                .count();
            assert_eq!(labeled.column_counts()[(order - 1) as usize], expected);
        }
    }

    #[test]
    fn events_out_of_range_leave_all_rows_normal() {
        let events = jieqi::term_calendar(2000, 2000).unwrap();
        let dates: Vec<NaiveDate> = (0..250)
            .map(|i| date(2030, 1, 1) + chrono::Duration::days(i))
            .collect();
        let trading: BTreeSet<NaiveDate> = dates.iter().copied().collect();
        let aligned = jieqi::align_terms(&events, &trading);
        let labeled = build_labeled(&returns_over(&dates), &aligned).unwrap();
        assert!(labeled.normal_day.iter().all(|&v| v == 1));
        assert_eq!(labeled.labeled_rows().len(), 0);
    }

    #[test]
    fn empty_event_list_is_an_error() {
        let dates = vec![date(2000, 1, 3), date(2000, 1, 4)];
        assert!(matches!(
            build_labeled(&returns_over(&dates), &[]),
            Err(Error::EmptyLabelSet)
        ));
    }

    #[test]
    fn window_labels_round_trip() {
        let events = jieqi::term_calendar(2000, 2001).unwrap();
        let dates: Vec<NaiveDate> = (0..730)
            .map(|i| date(2000, 1, 1) + chrono::Duration::days(i))
            .filter(|d| chrono::Datelike::weekday(d).num_days_from_monday() < 5)
            .collect();
        let trading: BTreeSet<NaiveDate> = dates.iter().copied().collect();
        let windows = jieqi::window_labels(&events, &trading, 1).unwrap();
        let labeled = build_labeled_windows(&returns_over(&dates), &windows).unwrap();
        assert_eq!(labeled.mode, LabelMode::Window { radius: 1 });
        let member_total: usize = windows.iter().map(|w| w.member_days.len()).sum();
        assert_eq!(labeled.column_counts().iter().sum::<usize>(), member_total);
    }

    #[test]
    fn lag_alignment() {
        let dates = vec![date(2000, 1, 3), date(2000, 1, 4), date(2000, 1, 5)];
        let returns = ReturnSeries {
            rows: dates.iter().zip([0.01, 0.02, 0.03]).map(|(&d, r)| (d, r)).collect(),
            method: ReturnMethod::Log,
        };
        let event = TermEvent {
            term: SolarTerm::new(3).unwrap(),
            year: 2000,
            instant: date(2000, 1, 4).and_hms_opt(9, 0, 0).unwrap(),
            trading_day: Some(date(2000, 1, 4)),
        };
        let labeled = build_labeled(&returns, &[event]).unwrap();
        assert_eq!(labeled.lagged_return(0), None);
        assert_eq!(labeled.lagged_return(1), Some(0.01));
        assert_eq!(labeled.lagged_return(2), Some(0.02));
        assert_eq!(labeled.row_term(1), Some(3));
    }

    proptest! {
        // First-order agreement of log and simple returns. The quadratic
        // bound with constant (1 + |simple|)/2 is valid for simple returns
        // in (-0.43, 0.5); the series |ln(1+r) - r| outgrows it just below
        // -0.43, so the generator stays inside that region.
        #[test]
        fn log_and_simple_agree_to_first_order(p0 in 1.0f64..1000.0, ratio in 0.58f64..1.499) {
            let prices = PriceSeries {
                rows: vec![(date(2000, 1, 3), p0), (date(2000, 1, 4), p0 * ratio)],
                source_id: "t".into(),
            };
            let log = compute_returns(&prices, ReturnMethod::Log).unwrap().rows[0].1;
            let simple = compute_returns(&prices, ReturnMethod::Simple).unwrap().rows[0].1;
            prop_assume!(simple.abs() < 0.5);
            let bound = simple * simple / 2.0 * (1.0 + simple.abs()) + 1e-12;
            prop_assert!((log - simple).abs() <= bound);
        }
    }
}
