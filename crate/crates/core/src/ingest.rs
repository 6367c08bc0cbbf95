//! Loading of raw exchange CSV exports and regularization onto a fixed
//! time grid.
//!
//! Exchange minute files routinely skip intervals with no trades. The grid
//! produced here forward-fills the last observed price into such bins (with
//! zero volume), so that later return computations see them as genuine
//! zero-return minutes rather than missing data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open UTC interval [start, end) in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: i64,
    pub end: i64,
}

impl Period {
    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

/// One trade bin as read from the exchange export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    /// Quote currency per base unit, strictly positive.
    pub price: f64,
    /// Base units traded in the bin.
    pub volume_base: f64,
    /// Quote currency traded in the bin; derived as volume_base * price when
    /// the export has no such column.
    pub volume_quote: f64,
}

/// Column-name mapping for [`load_csv`]. `None` fields fall back to the
/// documented default candidates.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: Option<String>,
    pub price: Option<String>,
    pub volume_base: Option<String>,
    pub volume_quote: Option<String>,
}

const TIMESTAMP_CANDIDATES: &[&str] = &["timestamp", "time"];
const PRICE_CANDIDATES: &[&str] = &["price", "close"];
const VOLUME_CANDIDATES: &[&str] = &["volume", "volume_base", "vol"];
const VOLUME_QUOTE_CANDIDATES: &[&str] = &["volume_quote", "volume_currency"];

/// Timestamps at or above this magnitude are interpreted as milliseconds
/// (1e11 s is year 5138; 1e11 ms is March 1973).
const MILLISECOND_THRESHOLD: i64 = 100_000_000_000;

/// Ingestion bookkeeping, emitted as JSON by the CLI.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub rows_read: u64,
    pub rows_dropped: u64,
    pub duplicates: u64,
    pub filled_bins: u64,
    pub period: Option<Period>,
}

/// Regular-grid price/volume series. Bin `i` covers the instant
/// `start + i * bin_seconds` exactly; no bins are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub start: i64,
    pub bin_seconds: u32,
    pub prices: Vec<f64>,
    pub volumes_base: Vec<f64>,
    pub volumes_quote: Vec<f64>,
    /// true = forward-filled (no record in the bin), false = observed.
    pub filled: Vec<bool>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn timestamp(&self, bin: usize) -> i64 {
        self.start + bin as i64 * self.bin_seconds as i64
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    /// The observed bins as records; re-running [`regularize`] on them
    /// reproduces this series bin for bin.
    pub fn observed_records(&self) -> Vec<PriceRecord> {
        (0..self.len())
            .filter(|&i| !self.filled[i])
            .map(|i| PriceRecord {
                timestamp: self.timestamp(i),
                price: self.prices[i],
                volume_base: self.volumes_base[i],
                volume_quote: self.volumes_quote[i],
            })
            .collect()
    }
}

fn resolve_column(
    headers: &csv::StringRecord,
    explicit: Option<&str>,
    candidates: &[&str],
    label: &str,
    required: bool,
) -> Result<Option<usize>> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    if let Some(name) = explicit {
        return match find(name) {
            Some(i) => Ok(Some(i)),
            None => Err(Error::MissingColumn(name.to_string())),
        };
    }
    for cand in candidates {
        if let Some(i) = find(cand) {
            return Ok(Some(i));
        }
    }
    if required {
        Err(Error::MissingColumn(label.to_string()))
    } else {
        Ok(None)
    }
}

fn parse_timestamp(field: &str, line: u64) -> Result<i64> {
    let trimmed = field.trim();
    // Exports sometimes format integer epochs as floats ("1325317920.0");
    // accept those, reject anything with a genuine fractional part.
    let raw: i64 = match trimmed.parse::<i64>() {
        Ok(v) => v,
        Err(_) => match trimmed.parse::<f64>() {
            Ok(f) if f.fract() == 0.0 && f.abs() < 9.0e18 => f as i64,
            _ => {
                return Err(Error::CsvRow {
                    line,
                    reason: format!(
                        "timestamp {:?} is not representable as epoch seconds",
                        field
                    ),
                })
            }
        },
    };
    Ok(if raw.abs() >= MILLISECOND_THRESHOLD {
        raw.div_euclid(1000)
    } else {
        raw
    })
}

fn parse_field(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::CsvRow {
        line,
        reason: format!("cannot parse {} from {:?}", what, field),
    })?;
    if !v.is_finite() {
        return Err(Error::CsvRow {
            line,
            reason: format!("{} is not finite", what),
        });
    }
    Ok(v)
}

/// Parses an exchange CSV export into records sorted ascending by timestamp.
///
/// Rows outside `period` are dropped; among rows sharing a timestamp the last
/// one in file order wins, and the count of losers is reported in the
/// diagnostics.
pub fn load_csv(
    path: &Path,
    schema: &CsvSchema,
    period: Option<Period>,
) -> Result<(Vec<PriceRecord>, IngestDiagnostics)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers = reader.headers()?.clone();

    let ts_col = resolve_column(
        &headers,
        schema.timestamp.as_deref(),
        TIMESTAMP_CANDIDATES,
        "timestamp",
        true,
    )?
    .expect("required column");
    let price_col = resolve_column(
        &headers,
        schema.price.as_deref(),
        PRICE_CANDIDATES,
        "price",
        true,
    )?
    .expect("required column");
    let vol_col = resolve_column(
        &headers,
        schema.volume_base.as_deref(),
        VOLUME_CANDIDATES,
        "volume",
        false,
    )?;
    let vol_quote_col = resolve_column(
        &headers,
        schema.volume_quote.as_deref(),
        VOLUME_QUOTE_CANDIDATES,
        "volume_quote",
        false,
    )?;

    let mut diagnostics = IngestDiagnostics {
        period,
        ..Default::default()
    };
    let mut by_timestamp: BTreeMap<i64, PriceRecord> = BTreeMap::new();
    let mut kept: u64 = 0;

    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        diagnostics.rows_read += 1;

        let timestamp = parse_timestamp(&row[ts_col], line)?;
        if let Some(p) = period {
            if !p.contains(timestamp) {
                diagnostics.rows_dropped += 1;
                continue;
            }
        }
        let price = parse_field(&row[price_col], line, "price")?;
        if price <= 0.0 {
            return Err(Error::CsvRow {
                line,
                reason: format!("non-positive price {}", price),
            });
        }
        let volume_base = match vol_col {
            Some(c) => parse_field(&row[c], line, "volume")?,
            None => 0.0,
        };
        let volume_quote = match vol_quote_col {
            Some(c) => parse_field(&row[c], line, "volume_quote")?,
            None => volume_base * price,
        };
        if volume_base < 0.0 || volume_quote < 0.0 {
            return Err(Error::CsvRow {
                line,
                reason: "negative volume".to_string(),
            });
        }
        kept += 1;
        by_timestamp.insert(
            timestamp,
            PriceRecord {
                timestamp,
                price,
                volume_base,
                volume_quote,
            },
        );
    }

    diagnostics.duplicates = kept - by_timestamp.len() as u64;
    Ok((by_timestamp.into_values().collect(), diagnostics))
}

/// Places records on the fixed grid from the first to the last record.
///
/// Bins containing several records keep the last record's price and the sum
/// of their volumes. Bins with no record carry the last observed price, zero
/// volume, and `filled = true`, so their 1-bin log-return is exactly zero.
pub fn regularize(records: &[PriceRecord], bin_seconds: u32) -> Result<PriceSeries> {
    if bin_seconds == 0 {
        return Err(Error::InvalidParameter {
            name: "bin_seconds",
            value: 0.0,
            constraint: "must be positive",
        });
    }
    if records.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: records.len(),
        });
    }
    let start = records[0].timestamp;
    let bin = bin_seconds as i64;
    let last_bin = (records[records.len() - 1].timestamp - start).div_euclid(bin) as usize;
    let n = last_bin + 1;
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }

    let mut prices = vec![f64::NAN; n];
    let mut volumes_base = vec![0.0; n];
    let mut volumes_quote = vec![0.0; n];
    let mut filled = vec![true; n];

    for rec in records {
        let idx = (rec.timestamp - start).div_euclid(bin);
        debug_assert!(idx >= 0);
        let idx = idx as usize;
        prices[idx] = rec.price;
        volumes_base[idx] += rec.volume_base;
        volumes_quote[idx] += rec.volume_quote;
        filled[idx] = false;
    }

    let mut last_price = prices[0];
    for i in 0..n {
        if filled[i] {
            prices[i] = last_price;
        } else {
            last_price = prices[i];
        }
    }

    Ok(PriceSeries {
        start,
        bin_seconds,
        prices,
        volumes_base,
        volumes_quote,
        filled,
    })
}

/// Maximal runs of consecutive zero 1-bin log-returns, as
/// (start index in the return sequence, run length) in time order.
pub fn zero_return_runs(series: &PriceSeries) -> Result<Vec<(usize, usize)>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: series.len(),
        });
    }
    let mut runs = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..series.len() - 1 {
        let zero = series.prices[i + 1].ln() - series.prices[i].ln() == 0.0;
        match (zero, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - s));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        runs.push((s, series.len() - 1 - s));
    }
    Ok(runs)
}
