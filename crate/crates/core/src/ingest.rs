//! Per-stock daily records: CSV loading, lifetime filtering and summary stats.
//!
//! One file per ticker, named `<TICKER>.csv`, with the header
//! `date,volume,close,shares_outstanding`. Consecutive records are treated as
//! successive trading days regardless of the calendar gap between them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_ordered, Parallelism};

pub const DEFAULT_MIN_LIFETIME: usize = 350;
pub const CSV_HEADER: [&str; 4] = ["date", "volume", "close", "shares_outstanding"];

#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub volume: u64,
    pub close: f64,
    pub shares_outstanding: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub ticker: String,
    pub records: Vec<DailyRecord>,
}

impl DailySeries {
    pub fn lifetime_days(&self) -> usize {
        self.records.len()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.volume as f64).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.close).collect()
    }
}

/// A filtered, ticker-sorted collection of series.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub stocks: Vec<DailySeries>,
    pub min_lifetime: usize,
}

impl Corpus {
    /// Builds a corpus, dropping series shorter than `min_lifetime` and
    /// sorting by ticker.
    pub fn new(mut stocks: Vec<DailySeries>, min_lifetime: usize) -> Self {
        stocks.retain(|s| s.lifetime_days() >= min_lifetime);
        stocks.sort_by(|a, b| a.ticker.cmp(&b.ticker));
        Corpus {
            stocks,
            min_lifetime,
        }
    }

    pub fn len(&self) -> usize {
        self.stocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stocks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub min_lifetime: usize,
    /// Malformed rows abort the load; duplicate dates reject the ticker.
    pub strict: bool,
    pub parallelism: Parallelism,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_lifetime: DEFAULT_MIN_LIFETIME,
            strict: false,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ShortLifetime { lifetime_days: usize },
    DuplicateDate { date: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub files_total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rows_total: usize,
    pub rows_malformed: usize,
    pub rows_duplicate: usize,
    /// Rejected tickers in ticker order.
    pub rejections: BTreeMap<String, RejectReason>,
}

#[derive(Debug)]
struct FileOutcome {
    ticker: String,
    series: Option<DailySeries>,
    reject: Option<RejectReason>,
    rows_total: usize,
    rows_malformed: usize,
    rows_duplicate: usize,
}

/// Loads every `*.csv` under `path` (or the single file `path`).
pub fn load_corpus(path: &Path, opts: &LoadOptions) -> Result<(Corpus, LoadSummary)> {
    let files = list_csv_files(path)?;
    let outcomes = map_ordered(&files, opts.parallelism, |f| load_file(f, opts));

    let mut summary = LoadSummary {
        files_total: files.len(),
        ..LoadSummary::default()
    };
    let mut stocks = Vec::new();
    for outcome in outcomes {
        let o = outcome?;
        summary.rows_total += o.rows_total;
        summary.rows_malformed += o.rows_malformed;
        summary.rows_duplicate += o.rows_duplicate;
        match (o.series, o.reject) {
            (Some(s), None) => {
                summary.accepted += 1;
                stocks.push(s);
            }
            (_, Some(reason)) => {
                summary.rejected += 1;
                summary.rejections.insert(o.ticker, reason);
            }
            (None, None) => unreachable!("file outcome without series or rejection"),
        }
    }
    Ok((Corpus::new(stocks, opts.min_lifetime), summary))
}

fn list_csv_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn ticker_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<DailyRecord, String> {
    if rec.len() < 3 || rec.len() > 4 {
        return Err(format!("expected 4 fields, found {}", rec.len()));
    }
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
        .map_err(|e| format!("bad date {:?}: {e}", field(0)))?;
    let volume: u64 = field(1)
        .parse()
        .map_err(|_| format!("bad volume {:?}", field(1)))?;
    let close: f64 = field(2)
        .parse()
        .map_err(|_| format!("bad close {:?}", field(2)))?;
    if !(close.is_finite() && close > 0.0) {
        return Err(format!("close must be positive, got {close}"));
    }
    let shares_outstanding = match field(3) {
        "" => None,
        s => {
            let v: u64 = s
                .parse()
                .map_err(|_| format!("bad shares_outstanding {s:?}"))?;
            if v == 0 {
                return Err("shares_outstanding must be positive".into());
            }
            Some(v)
        }
    };
    Ok(DailyRecord {
        date,
        volume,
        close,
        shares_outstanding,
    })
}

fn load_file(path: &Path, opts: &LoadOptions) -> Result<FileOutcome> {
    let ticker = ticker_of(path);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;

    let headers = reader.headers().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let header_ok = headers.len() == CSV_HEADER.len()
        && headers.iter().zip(CSV_HEADER).all(|(h, e)| h.trim() == e);
    if !header_ok {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }

    let mut records = Vec::new();
    let mut rows_total = 0;
    let mut rows_malformed = 0;
    for (line, row) in reader.records().enumerate() {
        rows_total += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| parse_row(&r));
        match parsed {
            Ok(r) => records.push(r),
            Err(message) if opts.strict => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: {message}", line + 2),
                })
            }
            Err(_) => rows_malformed += 1,
        }
    }

    // Stable sort keeps file order among equal dates, so dedup keeps the first.
    records.sort_by_key(|r| r.date);
    let before = records.len();
    let mut duplicate = None;
    records.dedup_by(|b, a| {
        let dup = a.date == b.date;
        if dup && duplicate.is_none() {
            duplicate = Some(a.date);
        }
        dup
    });
    let rows_duplicate = before - records.len();

    let mut outcome = FileOutcome {
        ticker: ticker.clone(),
        series: None,
        reject: None,
        rows_total,
        rows_malformed,
        rows_duplicate,
    };
    if let (true, Some(d)) = (opts.strict, duplicate) {
        outcome.reject = Some(RejectReason::DuplicateDate {
            date: d.to_string(),
        });
    } else if records.len() < opts.min_lifetime {
        outcome.reject = Some(RejectReason::ShortLifetime {
            lifetime_days: records.len(),
        });
    } else {
        outcome.series = Some(DailySeries { ticker, records });
    }
    Ok(outcome)
}

/// Writes one `<TICKER>.csv` per stock. Prices use the shortest decimal that
/// round-trips, so reloading reproduces the corpus exactly.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in &corpus.stocks {
        write_series(s, &dir.join(format!("{}.csv", s.ticker)))?;
    }
    Ok(())
}

pub fn write_series(series: &DailySeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let wrap = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in &series.records {
        let shares = r
            .shares_outstanding
            .map(|s| s.to_string())
            .unwrap_or_default();
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.volume.to_string(),
            r.close.to_string(),
            shares,
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Lifetime averages used as factor indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesStats {
    pub lifetime: usize,
    pub mean_volume: f64,
    pub mean_close: f64,
    /// Mean of close × volume.
    pub mean_trading_value: f64,
    /// Mean of close × shares outstanding over the days that report shares;
    /// absent when no day does.
    pub mean_capitalization: Option<f64>,
}

pub fn series_stats(s: &DailySeries) -> Result<SeriesStats> {
    if s.records.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty series", s.ticker)));
    }
    let n = s.records.len() as f64;
    let mut vol = 0.0;
    let mut close = 0.0;
    let mut value = 0.0;
    let mut cap = 0.0;
    let mut cap_days = 0usize;
    for r in &s.records {
        vol += r.volume as f64;
        close += r.close;
        value += r.close * r.volume as f64;
        if let Some(sh) = r.shares_outstanding {
            cap += r.close * sh as f64;
            cap_days += 1;
        }
    }
    Ok(SeriesStats {
        lifetime: s.records.len(),
        mean_volume: vol / n,
        mean_close: close / n,
        mean_trading_value: value / n,
        mean_capitalization: (cap_days > 0).then(|| cap / cap_days as f64),
    })
}
