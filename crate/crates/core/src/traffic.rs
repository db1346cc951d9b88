// SPDX-License-Identifier: Apache-2.0

//! Traffic intensity tables and the vehicle-arrival traces expanded from them.
//!
//! An [`IntensityTable`] holds, for every PoP, a contiguous series of
//! fixed-length windows with an arrival rate in vehicles/hour. Arrivals are
//! drawn per window from a homogeneous Poisson process: exponential gaps
//! starting at the window start, discarded once they pass the window end.
//! Each (PoP, window) pair owns its own random substream, so a trace only
//! depends on the table contents and the seed.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, Exp, StandardNormal};
use sha2::{Digest, Sha256};

use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_WINDOW_SECONDS: u64 = 300;
pub const SECONDS_PER_DAY: u64 = 86_400;
const MICROS: f64 = 1e6;

/// One CSV row of an intensity table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityEntry {
    pub window_start_s: u64,
    pub pop: usize,
    pub veh_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct PopSeries {
    start_s: u64,
    rates: Vec<f64>,
}

/// Per-PoP piecewise-constant arrival rates.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTable {
    window_s: u64,
    series: Vec<PopSeries>,
}

impl IntensityTable {
    /// Validates and groups rows. PoP ids must cover `0..P`, each PoP's
    /// windows must tile its time span without gaps or overlaps.
    pub fn from_entries(window_s: u64, entries: &[IntensityEntry]) -> Result<Self> {
        if window_s == 0 {
            return Err(Error::Intensity("window length must be positive".into()));
        }
        if entries.is_empty() {
            return Err(Error::Intensity("table has no rows".into()));
        }
        let pops = entries.iter().map(|e| e.pop).max().unwrap_or(0) + 1;
        let mut rows: Vec<Vec<(u64, f64)>> = (0..pops).map(|_| Vec::new()).collect();
        for e in entries {
            if !(e.veh_per_hour.is_finite() && e.veh_per_hour >= 0.0) {
                return Err(Error::Intensity(alloc::format!(
                    "PoP {} window {}: rate {} is not a non-negative number",
                    e.pop,
                    e.window_start_s,
                    e.veh_per_hour
                )));
            }
            if e.window_start_s % window_s != 0 {
                return Err(Error::Intensity(alloc::format!("PoP {} window {} is not aligned to {} s", e.pop, e.window_start_s, window_s)));
            }
            rows[e.pop].push((e.window_start_s, e.veh_per_hour));
        }
        let mut series = Vec::with_capacity(pops);
        for (pop, mut r) in rows.into_iter().enumerate() {
            if r.is_empty() {
                return Err(Error::Intensity(alloc::format!("PoP {pop} has no windows")));
            }
            r.sort_by_key(|&(s, _)| s);
            for w in r.windows(2) {
                let expected = w[0].0 + window_s;
                if w[1].0 < expected {
                    return Err(Error::Intensity(alloc::format!("PoP {pop}: window {} overlaps window {}", w[1].0, w[0].0)));
                }
                if w[1].0 > expected {
                    return Err(Error::Intensity(alloc::format!("PoP {pop}: gap between {} and {}", w[0].0, w[1].0)));
                }
            }
            series.push(PopSeries { start_s: r[0].0, rates: r.into_iter().map(|(_, l)| l).collect() });
        }
        Ok(Self { window_s, series })
    }

    pub fn window_seconds(&self) -> u64 {
        self.window_s
    }

    pub fn pops(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.series.iter().map(|s| s.rates.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows ordered by window start, then PoP.
    pub fn entries(&self) -> Vec<IntensityEntry> {
        let mut out: Vec<IntensityEntry> = self
            .series
            .iter()
            .enumerate()
            .flat_map(|(pop, s)| {
                s.rates.iter().enumerate().map(move |(k, &l)| IntensityEntry {
                    window_start_s: s.start_s + k as u64 * self.window_s,
                    pop,
                    veh_per_hour: l,
                })
            })
            .collect();
        out.sort_by_key(|e| (e.window_start_s, e.pop));
        out
    }

    /// Rate in vehicles/hour at `t_s` for `pop`, zero outside the table.
    pub fn rate_at(&self, pop: usize, t_s: f64) -> f64 {
        let s = &self.series[pop];
        if t_s < s.start_s as f64 {
            return 0.0;
        }
        let k = libm::floor((t_s - s.start_s as f64) / self.window_s as f64) as usize;
        s.rates.get(k).copied().unwrap_or(0.0)
    }

    /// SHA-256 over a canonical encoding of the table.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"v2n-intensity-v1");
        h.update(self.window_s.to_le_bytes());
        h.update((self.series.len() as u64).to_le_bytes());
        for s in &self.series {
            h.update(s.start_s.to_le_bytes());
            h.update((s.rates.len() as u64).to_le_bytes());
            for r in &s.rates {
                h.update(r.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

/// Parameters of the synthetic daily profile.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthParams {
    pub pops: usize,
    pub days: u32,
    pub peak_veh_per_hour: f64,
    pub trough_veh_per_hour: f64,
    /// Offset of PoP `p`'s daily cycle is `p * phase_per_pop_h` hours.
    pub phase_per_pop_h: f64,
    pub seed: u64,
}

/// Hour of day at which the cosine profile bottoms out for PoP 0.
const TROUGH_HOUR: f64 = 4.0;
/// Window-to-window fluctuation, as a fraction of the peak-trough swing.
const NOISE_FRACTION: f64 = 0.05;

/// Sinusoidal one-day profile with a city-wide noise term shared by all
/// PoPs, in 5-minute windows.
pub fn synth_intensity(params: &SynthParams) -> Result<IntensityTable> {
    let SynthParams { pops, days, peak_veh_per_hour: peak, trough_veh_per_hour: trough, phase_per_pop_h, seed } = *params;
    if pops == 0 || days == 0 {
        return Err(Error::InvalidArgument("pops and days must be positive".into()));
    }
    if !(trough >= 0.0 && peak >= trough && peak.is_finite()) {
        return Err(Error::InvalidArgument("need peak >= trough >= 0".into()));
    }
    let windows = (days as u64 * SECONDS_PER_DAY / DEFAULT_WINDOW_SECONDS) as usize;
    let swing = peak - trough;
    let mut noise_rng = rng::seeded(seed);
    let noise: Vec<f64> = (0..windows)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            NOISE_FRACTION * swing * z
        })
        .collect();
    let mut entries = Vec::with_capacity(windows * pops);
    for (k, eps) in noise.iter().enumerate() {
        let start = k as u64 * DEFAULT_WINDOW_SECONDS;
        let mid_h = (start as f64 + DEFAULT_WINDOW_SECONDS as f64 / 2.0) / 3600.0;
        for pop in 0..pops {
            let phase = mid_h - TROUGH_HOUR - pop as f64 * phase_per_pop_h;
            let shape = 0.5 * (1.0 - libm::cos(2.0 * PI * phase / 24.0));
            let rate = (trough + swing * shape + eps).max(0.0);
            entries.push(IntensityEntry { window_start_s: start, pop, veh_per_hour: rate });
        }
    }
    IntensityTable::from_entries(DEFAULT_WINDOW_SECONDS, &entries)
}

/// A vehicle appearing at `pop` at `t_us` microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrivalEvent {
    pub t_us: u64,
    pub pop: usize,
}

impl ArrivalEvent {
    pub fn time_s(&self) -> f64 {
        self.t_us as f64 / MICROS
    }
}

/// Provenance of a generated trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub seed: u64,
    pub source_hash: [u8; 32],
    pub rng: String,
}

/// Time-ordered arrivals over `pops` PoPs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    pops: usize,
    events: Vec<ArrivalEvent>,
    meta: Option<TraceMeta>,
}

impl TrafficTrace {
    /// Checks ordering (time, then PoP) and PoP range.
    pub fn new(pops: usize, events: Vec<ArrivalEvent>) -> Result<Self> {
        if pops == 0 {
            return Err(Error::Trace("a trace needs at least one PoP".into()));
        }
        for (i, e) in events.iter().enumerate() {
            if e.pop >= pops {
                return Err(Error::Trace(alloc::format!("event {i}: PoP {} outside 0..{pops}", e.pop)));
            }
        }
        for (i, w) in events.windows(2).enumerate() {
            if (w[1].t_us, w[1].pop) < (w[0].t_us, w[0].pop) {
                return Err(Error::Trace(alloc::format!("event {} is out of order", i + 1)));
            }
        }
        Ok(Self { pops, events, meta: None })
    }

    pub fn with_meta(mut self, meta: TraceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&TraceMeta> {
        self.meta.as_ref()
    }

    pub fn pops(&self) -> usize {
        self.pops
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Arrivals with `start_s <= t < end_s`; absolute times are kept.
    pub fn window(&self, start_s: f64, end_s: f64) -> TrafficTrace {
        let lo = libm::ceil(start_s * MICROS).max(0.0) as u64;
        let hi = libm::ceil(end_s * MICROS).max(0.0) as u64;
        let events = self.events.iter().copied().filter(|e| e.t_us >= lo && e.t_us < hi).collect();
        TrafficTrace { pops: self.pops, events, meta: self.meta.clone() }
    }

    pub fn prefix(&self, n: usize) -> TrafficTrace {
        let events = self.events[..n.min(self.events.len())].to_vec();
        TrafficTrace { pops: self.pops, events, meta: self.meta.clone() }
    }

    /// Widens the PoP count, e.g. after reading a file whose last PoP had no arrivals.
    pub fn with_pops(mut self, pops: usize) -> Result<Self> {
        if pops < self.pops {
            return Err(Error::Trace(alloc::format!("cannot shrink {} PoPs to {pops}", self.pops)));
        }
        self.pops = pops;
        Ok(self)
    }

    /// Time at which `fraction` of the arrivals have happened.
    pub fn quantile_time_s(&self, fraction: f64) -> Option<f64> {
        if self.events.is_empty() {
            return None;
        }
        let k = (libm::round(self.events.len() as f64 * fraction) as usize).min(self.events.len() - 1);
        Some(self.events[k].time_s())
    }
}

/// Substream id of window `window_index` at `pop`.
fn window_stream(pop: usize, window_index: u64) -> u64 {
    ((pop as u64) << 40) | (window_index & ((1 << 40) - 1))
}

/// Expands a table into one Poisson arrival trace.
pub fn generate_arrivals(table: &IntensityTable, seed: u64) -> TrafficTrace {
    let mut events = Vec::new();
    for (pop, s) in table.series.iter().enumerate() {
        for (k, &veh_per_hour) in s.rates.iter().enumerate() {
            if veh_per_hour <= 0.0 {
                continue;
            }
            let start = s.start_s + k as u64 * table.window_s;
            let end = (start + table.window_s) as f64;
            let window_index = start / table.window_s;
            let mut rng = rng::substream(seed, window_stream(pop, window_index));
            let gap = Exp::new(veh_per_hour / 3600.0).expect("positive rate");
            let mut t = start as f64;
            loop {
                t += gap.sample(&mut rng);
                if t >= end {
                    break;
                }
                let t_us = (libm::floor(t * MICROS) as u64).min(end as u64 * 1_000_000 - 1);
                events.push(ArrivalEvent { t_us, pop });
            }
        }
    }
    // stable: equal (time, PoP) keys keep generation order
    events.sort_by_key(|e| (e.t_us, e.pop));
    TrafficTrace {
        pops: table.pops(),
        events,
        meta: Some(TraceMeta { seed, source_hash: table.digest(), rng: rng::RNG_ALGORITHM.to_string() }),
    }
}

/// `k` traces seeded `base_seed..base_seed + k`.
pub fn replicate(table: &IntensityTable, base_seed: u64, k: usize) -> Result<Vec<TrafficTrace>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    Ok((0..k as u64).map(|i| generate_arrivals(table, base_seed.wrapping_add(i))).collect())
}
