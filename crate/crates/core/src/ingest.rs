//! Event-log ingestion: parse raw user events, cut them into daily blocks
//! inside the active window, and turn each block into waiting times.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::UserSample;
use crate::scalar::Scalar;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub user_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
}

impl EventRecord {
    pub fn new(user_id: impl Into<String>, timestamp: i64) -> Result<Self> {
        let user_id = user_id.into();
        if user_id.is_empty() {
            return Err(Error::Domain("empty user id".into()));
        }
        if timestamp < 0 {
            return Err(Error::Domain(format!("negative timestamp {timestamp}")));
        }
        Ok(EventRecord { user_id, timestamp })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    JsonLines,
}

impl FromStr for InputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "json-lines" | "jsonlines" | "ndjson" => Ok(InputFormat::JsonLines),
            other => Err(Error::Config(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub format: InputFormat,
    /// CSV only: skip the first line.
    pub has_header: bool,
    /// JSON-lines field holding the user id.
    pub user_field: String,
    /// JSON-lines field holding the timestamp.
    pub ts_field: String,
    /// Largest tolerated share of malformed records.
    pub max_error_rate: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            format: InputFormat::Csv,
            has_header: true,
            user_field: "user".into(),
            ts_field: "ts".into(),
            max_error_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedEvents {
    pub events: Vec<EventRecord>,
    pub malformed: usize,
    /// 1-based line number of the first malformed record.
    pub first_malformed: Option<usize>,
}

struct Tally {
    events: Vec<EventRecord>,
    malformed: usize,
    first_bad: Option<(usize, String)>,
}

impl Tally {
    fn bad(&mut self, line: usize, why: String) {
        self.malformed += 1;
        self.first_bad.get_or_insert((line, why));
    }
}

fn parse_csv<R: BufRead>(reader: R, opts: &ParseOptions, tally: &mut Tally) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
                    return Err(Error::Io(io));
                }
                let line = e.position().map_or(0, |p| p.line() as usize);
                tally.bad(line, e.to_string());
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let user = rec.get(0).unwrap_or("");
        let ts = rec.get(1).unwrap_or("");
        match ts.parse::<i64>().map_err(|e| e.to_string()).and_then(|ts| {
            EventRecord::new(user, ts).map_err(|e| e.to_string())
        }) {
            Ok(ev) => tally.events.push(ev),
            Err(why) => tally.bad(line, format!("{why} in {:?}", rec.iter().collect::<Vec<_>>())),
        }
    }
    Ok(())
}

fn parse_json_lines<R: BufRead>(reader: R, opts: &ParseOptions, tally: &mut Tally) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|v| {
                let user = match v.get(&opts.user_field) {
                    Some(serde_json::Value::String(s)) => s.clone(),
                    Some(serde_json::Value::Number(n)) => n.to_string(),
                    _ => return Err(format!("missing string field {:?}", opts.user_field)),
                };
                let ts = v
                    .get(&opts.ts_field)
                    .and_then(serde_json::Value::as_i64)
                    .ok_or_else(|| format!("missing integer field {:?}", opts.ts_field))?;
                EventRecord::new(user, ts).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(ev) => tally.events.push(ev),
            Err(why) => tally.bad(lineno, why),
        }
    }
    Ok(())
}

/// Parse an event stream. Malformed records are skipped and counted; the
/// parse fails only when their share exceeds `max_error_rate`.
pub fn parse_events<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<ParsedEvents> {
    let mut tally = Tally { events: Vec::new(), malformed: 0, first_bad: None };
    match opts.format {
        InputFormat::Csv => parse_csv(reader, opts, &mut tally)?,
        InputFormat::JsonLines => parse_json_lines(reader, opts, &mut tally)?,
    }
    let total = tally.events.len() + tally.malformed;
    if tally.malformed > 0 && tally.malformed as f64 > opts.max_error_rate * total as f64 {
        let (line, why) = tally.first_bad.expect("malformed > 0");
        return Err(Error::Format {
            line,
            message: format!("{why} ({} of {total} records malformed)", tally.malformed),
        });
    }
    Ok(ParsedEvents {
        events: tally.events,
        malformed: tally.malformed,
        first_malformed: tally.first_bad.map(|(l, _)| l),
    })
}

/// Active window and activity filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Inclusive window start, hour of day.
    pub window_start: u32,
    /// Inclusive window end, hour of day.
    pub window_end: u32,
    /// Users with fewer retained events over the whole log are dropped.
    pub min_activity: usize,
    /// Offset added to UTC timestamps to obtain local time.
    pub utc_offset_secs: i64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions { window_start: 8, window_end: 22, min_activity: 1000, utc_offset_secs: 0 }
    }
}

impl SegmentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window_start >= self.window_end || self.window_end > 24 {
            return Err(Error::Config(format!(
                "window must satisfy start < end <= 24, got {}:{}",
                self.window_start, self.window_end
            )));
        }
        Ok(())
    }

    pub fn window_secs(&self) -> (i64, i64) {
        (i64::from(self.window_start) * 3600, i64::from(self.window_end) * 3600)
    }
}

/// One user's events on one local calendar day, inside the window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayBlock {
    pub user_id: String,
    pub day: NaiveDate,
    /// Strictly increasing seconds within the local day.
    pub event_times: Vec<i64>,
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn day_from_index(day: i64) -> NaiveDate {
    if day >= 0 {
        epoch() + Days::new(day as u64)
    } else {
        epoch() - Days::new(day.unsigned_abs())
    }
}

pub fn day_index(date: NaiveDate) -> i64 {
    (date - epoch()).num_days()
}

fn user_blocks(user: &str, mut local_times: Vec<i64>, opts: &SegmentOptions) -> Vec<DayBlock> {
    let (lo, hi) = opts.window_secs();
    local_times.retain(|&t| (lo..=hi).contains(&t.rem_euclid(SECONDS_PER_DAY)));
    local_times.sort_unstable();
    local_times.dedup();
    if local_times.len() < opts.min_activity {
        return Vec::new();
    }
    let mut blocks: Vec<DayBlock> = Vec::new();
    let mut current_day = None;
    for t in local_times {
        let day = t.div_euclid(SECONDS_PER_DAY);
        let sod = t.rem_euclid(SECONDS_PER_DAY);
        if current_day != Some(day) {
            current_day = Some(day);
            blocks.push(DayBlock { user_id: user.to_string(), day: day_from_index(day), event_times: Vec::new() });
        }
        blocks.last_mut().expect("pushed").event_times.push(sod);
    }
    blocks
}

/// Group events into per-user daily blocks inside the active window.
/// Output is sorted by user then day; users are processed in parallel.
pub fn segment_blocks(events: &[EventRecord], opts: &SegmentOptions) -> Result<Vec<DayBlock>> {
    opts.validate()?;
    let mut by_user: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for ev in events {
        by_user
            .entry(ev.user_id.as_str())
            .or_default()
            .push(ev.timestamp + opts.utc_offset_secs);
    }
    let per_user: Vec<Vec<DayBlock>> = by_user
        .into_par_iter()
        .map(|(user, times)| user_blocks(user, times, opts))
        .collect();
    Ok(per_user.into_iter().flatten().collect())
}

/// Waiting times of one block; the canonical interchange record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterEventSequence<T = u64> {
    pub user: String,
    #[serde(with = "date_format")]
    pub day: NaiveDate,
    pub times: Vec<T>,
}

mod date_format {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&d.format("%Y-%m-%d"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(serde::de::Error::custom)
    }
}

/// Blocks with fewer than two events produce no sequence.
pub fn to_sequences(blocks: &[DayBlock]) -> Vec<InterEventSequence> {
    blocks
        .iter()
        .filter(|b| b.event_times.len() >= 2)
        .map(|b| InterEventSequence {
            user: b.user_id.clone(),
            day: b.day,
            times: b.event_times.windows(2).map(|w| (w[1] - w[0]) as u64).collect(),
        })
        .collect()
}

/// Write sequences as JSON-lines, one block per line.
pub fn write_sequences<W: Write, T: Serialize>(mut w: W, seqs: &[InterEventSequence<T>]) -> Result<()> {
    for s in seqs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sequence file. Times may be integers or, for simulator output at
/// full precision, reals; they must be finite and nonnegative.
pub fn read_sequences<R: BufRead, T: Scalar>(reader: R) -> Result<Vec<InterEventSequence<T>>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InterEventSequence<f64> = serde_json::from_str(&line)
            .map_err(|e| Error::Format { line: i + 1, message: e.to_string() })?;
        if let Some(bad) = rec.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Format { line: i + 1, message: format!("invalid waiting time {bad}") });
        }
        out.push(InterEventSequence { user: rec.user, day: rec.day, times: rec.times.into_iter().map(T::of).collect() });
    }
    Ok(out)
}

/// Group sequences by user (sorted by id), one block per sequence.
pub fn group_by_user<T: Scalar>(seqs: Vec<InterEventSequence<T>>) -> Vec<UserSample<T>> {
    let mut map: BTreeMap<String, Vec<(NaiveDate, Vec<T>)>> = BTreeMap::new();
    for s in seqs {
        map.entry(s.user).or_default().push((s.day, s.times));
    }
    map.into_iter()
        .map(|(user, mut blocks)| {
            blocks.sort_by_key(|(d, _)| *d);
            UserSample::new(user, blocks.into_iter().map(|(_, b)| b).collect())
        })
        .collect()
}

/// Parse a UTC offset: `+02:00`, `-5`, `5:30`, or `Z`.
pub fn parse_utc_offset(s: &str) -> Result<i64> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("z") || s.is_empty() {
        return Ok(0);
    }
    let bad = || Error::Config(format!("cannot parse UTC offset {s:?}"));
    let (sign, rest) = match s.as_bytes()[0] {
        b'+' => (1, &s[1..]),
        b'-' => (-1, &s[1..]),
        _ => (1, s),
    };
    let (h, m) = match rest.split_once(':') {
        Some((h, m)) => (h.parse::<i64>().map_err(|_| bad())?, m.parse::<i64>().map_err(|_| bad())?),
        None => (rest.parse::<i64>().map_err(|_| bad())?, 0),
    };
    if h > 14 || m >= 60 {
        return Err(bad());
    }
    Ok(sign * (h * 3600 + m * 60))
}
