// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON file formats.
//!
//! | file | columns |
//! |------|---------|
//! | profile | `cpus,decode_ms_per_frame,analyze_ms_per_frame` |
//! | intensity | `window_start_s,pop_id,lambda_veh_per_hour` |
//! | trace | `t_s,pop_id` (seconds with six decimals) |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use v2n_core::queueing::ServiceProfile;
use v2n_core::traffic::{ArrivalEvent, IntensityEntry, IntensityTable, TrafficTrace, DEFAULT_WINDOW_SECONDS};

use crate::error::{Result, SimError};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(SimError::io(path))?))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(SimError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(SimError::io(path))?;
    serde_json::from_str(&text).map_err(SimError::json(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(SimError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(SimError::io(path))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(SimError::csv(path))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(SimError::csv(path))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(SimError::csv(path))?;
    if got.iter().ne(want.iter().copied()) {
        return Err(SimError::format(
            path,
            format!("expected header {}, found {}", want.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    cpus: u32,
    decode_ms_per_frame: f64,
    analyze_ms_per_frame: f64,
}

/// Rows must list `cpus = 1..=k` (any order).
pub fn read_profile(path: &Path, task_rate: f64) -> Result<ServiceProfile> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["cpus", "decode_ms_per_frame", "analyze_ms_per_frame"])?;
    let mut rows: Vec<ProfileRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(SimError::csv(path))?;
    rows.sort_by_key(|r| r.cpus);
    if rows.iter().enumerate().any(|(i, r)| r.cpus as usize != i + 1) {
        return Err(SimError::format(path, "cpus must run 1, 2, ..., k without gaps"));
    }
    let decode = rows.iter().map(|r| r.decode_ms_per_frame).collect();
    let analyze = rows.iter().map(|r| r.analyze_ms_per_frame).collect();
    Ok(ServiceProfile::new(decode, analyze, task_rate)?)
}

pub fn write_profile(path: &Path, profile: &ServiceProfile) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (i, (&d, &a)) in profile.decode_ms().iter().zip(profile.analyze_ms()).enumerate() {
        let row = ProfileRow { cpus: i as u32 + 1, decode_ms_per_frame: d, analyze_ms_per_frame: a };
        w.serialize(row).map_err(SimError::csv(path))?;
    }
    w.flush().map_err(SimError::io(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct IntensityRow {
    window_start_s: u64,
    pop_id: usize,
    lambda_veh_per_hour: f64,
}

/// Without `window_s`, the window length is the smallest gap between
/// distinct window starts (five minutes if there is only one start).
pub fn read_intensity(path: &Path, window_s: Option<u64>) -> Result<IntensityTable> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["window_start_s", "pop_id", "lambda_veh_per_hour"])?;
    let rows: Vec<IntensityRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(SimError::csv(path))?;
    let window_s = window_s.unwrap_or_else(|| {
        let mut starts: Vec<u64> = rows.iter().map(|r| r.window_start_s).collect();
        starts.sort_unstable();
        starts.dedup();
        starts.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(DEFAULT_WINDOW_SECONDS)
    });
    let entries: Vec<IntensityEntry> = rows
        .iter()
        .map(|r| IntensityEntry { window_start_s: r.window_start_s, pop: r.pop_id, veh_per_hour: r.lambda_veh_per_hour })
        .collect();
    Ok(IntensityTable::from_entries(window_s, &entries)?)
}

pub fn write_intensity(path: &Path, table: &IntensityTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    for e in table.entries() {
        let row = IntensityRow { window_start_s: e.window_start_s, pop_id: e.pop, lambda_veh_per_hour: e.veh_per_hour };
        w.serialize(row).map_err(SimError::csv(path))?;
    }
    w.flush().map_err(SimError::io(path))
}

/// Exact microsecond rendering, e.g. `12.000345`.
pub fn format_time_us(t_us: u64) -> String {
    format!("{}.{:06}", t_us / 1_000_000, t_us % 1_000_000)
}

/// Inverse of [`format_time_us`]; at most six decimals, no float rounding.
pub fn parse_time_us(s: &str) -> Option<u64> {
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() || frac.len() > 6 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let micros: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<6}").parse().ok()? };
    whole.parse::<u64>().ok()?.checked_mul(1_000_000)?.checked_add(micros)
}

pub fn write_trace(path: &Path, trace: &TrafficTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t_s", "pop_id"]).map_err(SimError::csv(path))?;
    for e in trace.events() {
        w.write_record([format_time_us(e.t_us), e.pop.to_string()]).map_err(SimError::csv(path))?;
    }
    w.flush().map_err(SimError::io(path))
}

pub fn read_trace(path: &Path, pops: usize) -> Result<TrafficTrace> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["t_s", "pop_id"])?;
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(SimError::csv(path))?;
        let bad = || SimError::format(path, format!("row {}: cannot parse {:?}", i + 1, rec.iter().collect::<Vec<_>>()));
        let t_us = parse_time_us(&rec[0]).ok_or_else(bad)?;
        let pop = rec[1].parse().map_err(|_| bad())?;
        events.push(ArrivalEvent { t_us, pop });
    }
    TrafficTrace::new(pops, events).map_err(|e| SimError::format(path, e.to_string()))
}
