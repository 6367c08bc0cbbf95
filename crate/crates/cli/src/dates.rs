//! Timestamp argument parsing and UTC calendar helpers.

use anyhow::{bail, Context};
use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};

/// Accepts integer epoch seconds, `YYYY-MM-DD` (midnight UTC), or
/// `YYYY-MM-DDTHH:MM:SS` with an optional trailing `Z`.
pub fn parse_time_arg(s: &str) -> anyhow::Result<i64> {
    let s = s.trim();
    if let Ok(epoch) = s.parse::<i64>() {
        return Ok(epoch);
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    let trimmed = s.strip_suffix('Z').unwrap_or(s);
    if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    bail!(
        "cannot parse {:?} as epoch seconds, YYYY-MM-DD, or YYYY-MM-DDTHH:MM:SS",
        s
    )
}

pub fn utc(epoch: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(epoch, 0).single().expect("valid epoch")
}

/// Start of the UTC day containing `epoch`.
pub fn day_start(epoch: i64) -> i64 {
    epoch.div_euclid(86_400) * 86_400
}

/// Calendar-month windows [start, end) covering [from, to), UTC. The first
/// window starts at the first month boundary at or after `from`.
pub fn month_windows(from: i64, to: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let date = utc(from).date_naive();
    let mut cursor = if date.day() == 1 && from == day_start(from) {
        date
    } else {
        next_month(date.with_day(1).unwrap())
    };
    loop {
        let start = cursor.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        let end_date = next_month(cursor);
        let end = end_date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        if end > to {
            break;
        }
        out.push((start, end));
        cursor = end_date;
    }
    out
}

fn next_month(date: NaiveDate) -> NaiveDate {
    let (year, month) = if date.month() == 12 {
        (date.year() + 1, 1)
    } else {
        (date.year(), date.month() + 1)
    };
    NaiveDate::from_ymd_opt(year, month, 1).unwrap()
}

/// Context-adding wrapper used by clap value parsers.
pub fn parse_time_flag(s: &str) -> anyhow::Result<i64> {
    parse_time_arg(s).with_context(|| format!("invalid time argument {:?}", s))
}
