// SPDX-License-Identifier: Apache-2.0

//! Aggregation of episode records into a [`MetricsReport`].
//!
//! Per-trace means are averaged with equal weight per trace. Violation
//! fractions and per-PoP figures pool every step of every trace.

use serde::{Deserialize, Serialize};
use v2n_core::env::EpisodeRecord;

use crate::config::Window;

pub const REPORT_VERSION: u32 = 1;

/// Decision latency summary in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], q: f64) -> u64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl LatencyStats {
    pub fn from_ns(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self { samples: 0, mean_us: 0.0, p50_us: 0.0, p99_us: 0.0, max_us: 0.0 };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let us = |ns: u64| ns as f64 / 1e3;
        Self {
            samples: sorted.len(),
            mean_us: sorted.iter().map(|&n| n as f64).sum::<f64>() / sorted.len() as f64 / 1e3,
            p50_us: us(percentile(&sorted, 0.5)),
            p99_us: us(percentile(&sorted, 0.99)),
            max_us: us(*sorted.last().expect("non-empty")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub seed: u64,
    pub steps: usize,
    pub mean_reward: f64,
    pub mean_active_cpus: f64,
    pub violation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopMetrics {
    pub pop: usize,
    pub mean_reward: f64,
    pub mean_cpus: f64,
    pub vehicles_placed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub name: String,
    pub kind: String,
    /// Mean over traces of each trace's mean step reward.
    pub mean_reward: f64,
    /// Sample standard deviation of the per-trace means.
    pub std_reward: f64,
    /// Mean over traces of the per-step total CPU count.
    pub mean_active_cpus: f64,
    /// Vehicles with delay above the target, over all traces.
    pub violation_fraction: f64,
    pub vehicles: usize,
    pub per_trace: Vec<TraceMetrics>,
    pub per_pop: Vec<PopMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_us: Option<LatencyStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub seed: u64,
    pub test_window: Window,
    pub d_tgt_ms: f64,
    pub agents: Vec<AgentMetrics>,
}

impl MetricsReport {
    pub fn agent(&self, name: &str) -> Option<&AgentMetrics> {
        self.agents.iter().find(|a| a.name == name)
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// `runs` holds `(trace seed, record)` pairs in trace order.
pub fn agent_metrics(name: &str, kind: &str, runs: &[(u64, EpisodeRecord)], d_tgt_ms: f64) -> AgentMetrics {
    let per_trace: Vec<TraceMetrics> = runs
        .iter()
        .map(|(seed, r)| TraceMetrics {
            seed: *seed,
            steps: r.steps(),
            mean_reward: r.mean_reward(),
            mean_active_cpus: r.mean_total_cpus(),
            violation_fraction: r.violation_fraction(d_tgt_ms),
        })
        .collect();
    let means: Vec<f64> = per_trace.iter().map(|t| t.mean_reward).collect();
    let vehicles: usize = runs.iter().map(|(_, r)| r.delays.len()).sum();
    let violations: usize = runs.iter().map(|(_, r)| r.delays.iter().filter(|d| d.as_ms() > d_tgt_ms).count()).sum();

    let pops = runs.iter().map(|(_, r)| r.pops).max().unwrap_or(0);
    let steps: usize = runs.iter().map(|(_, r)| r.steps()).sum();
    let per_pop = (0..pops)
        .map(|p| {
            let column = |v: &[f64]| v.iter().skip(p).step_by(pops).copied().collect::<Vec<_>>();
            let rewards = runs.iter().flat_map(|(_, r)| column(&r.pop_rewards));
            let cpus = runs.iter().flat_map(|(_, r)| r.cpus.iter().skip(p).step_by(pops).map(|&c| f64::from(c)));
            PopMetrics {
                pop: p,
                mean_reward: if steps == 0 { 0.0 } else { rewards.sum::<f64>() / steps as f64 },
                mean_cpus: if steps == 0 { 0.0 } else { cpus.sum::<f64>() / steps as f64 },
                vehicles_placed: runs.iter().map(|(_, r)| r.placements.iter().filter(|&&q| q == p).count()).sum(),
            }
        })
        .collect();

    let latencies: Vec<u64> = runs.iter().flat_map(|(_, r)| r.latency_ns.iter().copied()).collect();
    AgentMetrics {
        name: name.to_string(),
        kind: kind.to_string(),
        mean_reward: mean(means.iter().copied()),
        std_reward: sample_std(&means),
        mean_active_cpus: mean(per_trace.iter().map(|t| t.mean_active_cpus)),
        violation_fraction: if vehicles == 0 { 0.0 } else { violations as f64 / vehicles as f64 },
        vehicles,
        per_trace,
        per_pop,
        latency_us: (!latencies.is_empty()).then(|| LatencyStats::from_ns(&latencies)),
    }
}

/// Counts of finite delays in `[k·bin_ms, (k+1)·bin_ms)` and the number of
/// overloaded vehicles.
pub fn delay_histogram<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>, bin_ms: f64) -> (Vec<u64>, u64) {
    let mut bins = Vec::new();
    let mut overload = 0;
    for r in records {
        for d in &r.delays {
            match d.ms() {
                Some(ms) => {
                    let k = (ms / bin_ms).floor() as usize;
                    if bins.len() <= k {
                        bins.resize(k + 1, 0);
                    }
                    bins[k] += 1;
                }
                None => overload += 1,
            }
        }
    }
    (bins, overload)
}

/// Fraction of steps with total CPUs `<= c`, for `c = 0..=max_total`.
pub fn cpu_ecdf<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>, max_total: u32) -> Vec<f64> {
    let mut counts = vec![0u64; max_total as usize + 1];
    for r in records {
        for total in r.total_cpus() {
            counts[total.min(max_total) as usize] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    let mut acc = 0;
    counts
        .iter()
        .map(|c| {
            acc += c;
            if n == 0 {
                0.0
            } else {
                acc as f64 / n as f64
            }
        })
        .collect()
}
