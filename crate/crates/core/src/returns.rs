//! Price ingestion, simple daily returns and market-average volatility.
//!
//! Two CSV layouts are accepted:
//!
//! * one file per stock with header `date,close` (the ticker is the file stem);
//!   a directory argument loads every `*.csv` file in it, sorted by name;
//! * a wide matrix with header `date,<ticker1>,<ticker2>,...`.
//!
//! Missing cells (`""`, `NA`, `NaN`, `null`) and non-positive prices are dropped
//! and counted per ticker; the return across such a gap spans the missing days.
//! A cell that is present but not a number is a hard error.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::population_std;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

/// Daily returns of one stock with the population standard deviation over the
/// whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub ticker: String,
    pub returns: Vec<f64>,
    pub sigma: f64,
}

impl ReturnSeries {
    pub fn new(ticker: impl Into<String>, returns: Vec<f64>) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::InsufficientData {
                what: "return series",
                needed: 1,
                got: 0,
            });
        }
        if let Some(bad) = returns.iter().find(|r| !r.is_finite()) {
            return Err(Error::invalid("returns", format!("non-finite return {bad}")));
        }
        let sigma = population_std(&returns);
        Ok(ReturnSeries {
            ticker: ticker.into(),
            returns,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketStats {
    pub n_series: usize,
    pub sigma_bar: f64,
    pub per_series_sigma: Vec<(String, f64)>,
}

// Serialized as `{n_series, sigma_bar, per_series_sigma: {ticker: value}}` with
// tickers in input order.
impl Serialize for MarketStats {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Sigmas<'a>(&'a [(String, f64)]);
        impl Serialize for Sigmas<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_map(self.0.iter().map(|(k, v)| (k, v)))
            }
        }
        let mut st = serializer.serialize_struct("MarketStats", 3)?;
        st.serialize_field("n_series", &self.n_series)?;
        st.serialize_field("sigma_bar", &self.sigma_bar)?;
        st.serialize_field("per_series_sigma", &Sigmas(&self.per_series_sigma))?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceLayout {
    PerStock,
    Wide,
}

/// Result of loading price files: the usable series plus data-quality notes.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub series: Vec<PriceSeries>,
    /// Tickers with at least one dropped row, and how many rows were dropped.
    pub dropped: Vec<(String, usize)>,
    /// Tickers left with fewer than two valid prices.
    pub skipped: Vec<String>,
}

pub fn load_prices(path: &Path, layout: PriceLayout) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    match layout {
        PriceLayout::PerStock => {
            let files = if path.is_dir() {
                let mut files: Vec<PathBuf> = fs::read_dir(path)
                    .map_err(|e| Error::io(path, e))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                    .collect();
                files.sort();
                if files.is_empty() {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        message: "directory contains no .csv files".into(),
                    });
                }
                files
            } else {
                vec![path.to_path_buf()]
            };
            for file in files {
                let ticker = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let columns = read_price_table(&file, Some("close"))?;
                let (_, col) = columns.into_iter().next().expect("one price column");
                report.push(ticker, col);
            }
        }
        PriceLayout::Wide => {
            for (ticker, col) in read_price_table(path, None)? {
                report.push(ticker, col);
            }
        }
    }
    Ok(report)
}

struct PriceColumn {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
    dropped: usize,
}

impl LoadReport {
    fn push(&mut self, ticker: String, col: PriceColumn) {
        if col.dropped > 0 {
            self.dropped.push((ticker.clone(), col.dropped));
        }
        if col.prices.len() < 2 {
            self.skipped.push(ticker);
            return;
        }
        self.series.push(PriceSeries {
            ticker,
            dates: col.dates,
            prices: col.prices,
        });
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || c.eq_ignore_ascii_case("na")
        || c.eq_ignore_ascii_case("nan")
        || c.eq_ignore_ascii_case("null")
}

/// Reads a `date,<col>...` table. With `expect_single = Some(name)` the header
/// must be exactly `date,<name>`.
fn read_price_table(path: &Path, expect_single: Option<&str>) -> Result<Vec<(String, PriceColumn)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "empty file".into(),
        });
    }
    if !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("first column must be `date`, found `{}`", &header[0]),
        });
    }
    match expect_single {
        Some(name) if header.len() != 2 || !header[1].eq_ignore_ascii_case(name) => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("expected header `date,{name}`"),
            });
        }
        None if header.len() < 2 => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "wide matrix needs at least one ticker column".into(),
            });
        }
        _ => {}
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut columns: Vec<PriceColumn> = names
        .iter()
        .map(|_| PriceColumn {
            dates: Vec::new(),
            prices: Vec::new(),
            dropped: 0,
        })
        .collect();

    let mut last_date: Option<NaiveDate> = None;
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        rows += 1;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |column: &str, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            column: column.to_owned(),
            message,
        };
        if record.len() != header.len() {
            return Err(malformed(
                "*",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| malformed("date", format!("bad ISO date `{}`: {e}", &record[0])))?;
        if let Some(prev) = last_date {
            if date <= prev {
                return Err(malformed("date", format!("dates not strictly increasing ({prev} then {date})")));
            }
        }
        last_date = Some(date);
        for (k, col) in columns.iter_mut().enumerate() {
            let cell = &record[k + 1];
            if is_missing(cell) {
                col.dropped += 1;
                continue;
            }
            let price: f64 = cell
                .parse()
                .map_err(|_| malformed(&names[k], format!("non-numeric price `{cell}`")))?;
            if !(price.is_finite() && price > 0.0) {
                col.dropped += 1;
                continue;
            }
            col.dates.push(date);
            col.prices.push(price);
        }
    }
    if rows == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(names.into_iter().zip(columns).collect())
}

/// Simple returns `(p(t) - p(t-1)) / p(t-1)`.
pub fn to_returns(p: &PriceSeries) -> Result<ReturnSeries> {
    if p.prices.len() < 2 {
        return Err(Error::InsufficientData {
            what: "price series",
            needed: 2,
            got: p.prices.len(),
        });
    }
    let returns = p.prices.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    ReturnSeries::new(p.ticker.clone(), returns)
}

pub fn market_stats(rs: &[ReturnSeries]) -> Result<MarketStats> {
    if rs.is_empty() {
        return Err(Error::Empty("return series list"));
    }
    let per_series_sigma: Vec<(String, f64)> =
        rs.iter().map(|r| (r.ticker.clone(), r.sigma)).collect();
    // Sorted summation keeps the mean independent of input order.
    let mut sigmas: Vec<f64> = rs.iter().map(|r| r.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    let sigma_bar = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    Ok(MarketStats {
        n_series: rs.len(),
        sigma_bar,
        per_series_sigma,
    })
}

pub fn write_returns_csv(path: &Path, rs: &[ReturnSeries]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_to_io(path, e))?;
    wtr.write_record(["ticker", "day_index", "return"])?;
    for series in rs {
        for (i, r) in series.returns.iter().enumerate() {
            wtr.write_record([series.ticker.as_str(), &i.to_string(), &r.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the `ticker,day_index,return` export. Rows of one ticker must carry
/// consecutive day indices starting at 0; tickers keep first-appearance order.
pub fn read_returns_csv(path: &Path) -> Result<Vec<ReturnSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_to_io(path, e))?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["ticker", "day_index", "return"] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "expected header `ticker,day_index,return`".into(),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut data: HashMap<String, Vec<f64>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |column: &str, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            column: column.to_owned(),
            message,
        };
        let ticker = record[0].to_owned();
        let day: usize = record[1]
            .parse()
            .map_err(|_| malformed("day_index", format!("not an index: `{}`", &record[1])))?;
        let r: f64 = record[2]
            .parse()
            .map_err(|_| malformed("return", format!("non-numeric return `{}`", &record[2])))?;
        if !r.is_finite() {
            return Err(malformed("return", "non-finite return".into()));
        }
        let entry = data.entry(ticker.clone()).or_insert_with(|| {
            order.push(ticker);
            Vec::new()
        });
        if day != entry.len() {
            return Err(malformed(
                "day_index",
                format!("expected day {} , found {day}", entry.len()),
            ));
        }
        entry.push(r);
    }
    if order.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    order
        .into_iter()
        .map(|t| {
            let returns = data.remove(&t).unwrap_or_default();
            ReturnSeries::new(t, returns)
        })
        .collect()
}

pub fn write_stats_json(path: &Path, stats: &MarketStats) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, stats)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_to_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}
