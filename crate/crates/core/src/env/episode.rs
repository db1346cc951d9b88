// SPDX-License-Identifier: Apache-2.0

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{EnvConfig, Environment, FullAction};
use crate::agents::{DecisionContext, PlacementPolicy, ScalingPolicy};
use crate::queueing::Delay;
use crate::traffic::TrafficTrace;
use crate::{Error, Result};

/// Monotonic time source for decision latencies; the core crate has none.
pub trait Clock {
    fn now_ns(&self) -> u64;
}

/// Reports zero for every reading.
pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

/// Everything recorded while driving one trace to exhaustion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeRecord {
    pub pops: usize,
    /// PoP-averaged reward per step.
    pub rewards: Vec<f64>,
    /// `pops` rewards per step, row-major.
    pub pop_rewards: Vec<f64>,
    pub origins: Vec<usize>,
    pub placements: Vec<usize>,
    pub delays: Vec<Delay>,
    /// `pops` post-action CPU counts per step, row-major.
    pub cpus: Vec<u32>,
    pub latency_ns: Vec<u64>,
}

impl EpisodeRecord {
    pub fn steps(&self) -> usize {
        self.rewards.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.rewards.is_empty() {
            0.0
        } else {
            self.total_reward() / self.rewards.len() as f64
        }
    }

    /// Mean reward over the first `k + 1` steps, for every `k`.
    pub fn running_average(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.rewards
            .iter()
            .enumerate()
            .map(|(i, r)| {
                acc += r;
                acc / (i + 1) as f64
            })
            .collect()
    }

    pub fn cpus_at(&self, step: usize) -> &[u32] {
        &self.cpus[step * self.pops..(step + 1) * self.pops]
    }

    pub fn total_cpus(&self) -> impl Iterator<Item = u32> + '_ {
        self.cpus.chunks(self.pops.max(1)).map(|c| c.iter().sum())
    }

    pub fn mean_total_cpus(&self) -> f64 {
        if self.rewards.is_empty() {
            return 0.0;
        }
        self.total_cpus().map(f64::from).sum::<f64>() / self.steps() as f64
    }

    /// Share of vehicles whose delay exceeded `d_tgt_ms` (overloads included).
    pub fn violation_fraction(&self, d_tgt_ms: f64) -> f64 {
        if self.delays.is_empty() {
            return 0.0;
        }
        self.delays.iter().filter(|d| d.as_ms() > d_tgt_ms).count() as f64 / self.delays.len() as f64
    }
}

/// Drives `trace` to exhaustion: observe, place, scale, step. An empty
/// trace yields an empty record. Agent failures carry the step index.
pub fn run_episode<P, S>(
    trace: &TrafficTrace,
    cfg: &EnvConfig,
    dwell_seed: u64,
    placement: &mut P,
    scaling: &mut S,
    clock: &dyn Clock,
) -> Result<EpisodeRecord>
where
    P: PlacementPolicy + ?Sized,
    S: ScalingPolicy + ?Sized,
{
    let pops = trace.pops();
    let mut record = EpisodeRecord { pops, ..EpisodeRecord::default() };
    if trace.is_empty() {
        return Ok(record);
    }
    let n = trace.len();
    record.rewards.reserve(n);
    record.pop_rewards.reserve(n * pops);
    record.cpus.reserve(n * pops);

    let mut env = Environment::new(trace, cfg.clone(), dwell_seed)?;
    let wrap = |step: usize| move |e: Error| Error::Agent { step, source: Box::new(e) };
    while env.peek_arrival().is_some() {
        let arrival = env.pending_arrival().expect("peeked");
        let step = arrival.index;
        let origin = arrival.origin;
        let ctx = DecisionContext { arrival, pops: env.pops(), config: env.config() };
        let started = clock.now_ns();
        let target = placement.place(&ctx);
        let deltas = scaling.scale(&ctx, target).map_err(wrap(step))?;
        let latency = clock.now_ns().saturating_sub(started);

        let outcome = env.step(&FullAction { placement: target, deltas })?;
        scaling.observe(&outcome).map_err(wrap(step))?;

        record.rewards.push(outcome.avg_reward);
        record.pop_rewards.extend_from_slice(&outcome.per_pop_rewards);
        record.origins.push(origin);
        record.placements.push(target);
        record.delays.push(outcome.vehicle_delay);
        record.cpus.extend(outcome.next_state.per_pop.iter().map(|o| o.cpus));
        record.latency_ns.push(latency);
    }
    scaling.finish_episode().map_err(wrap(n))?;
    Ok(record)
}
