// SPDX-License-Identifier: Apache-2.0

//! Arrival-driven placement and scaling environment.
//!
//! On each vehicle arrival the environment drops vehicles that already
//! left, reports the per-PoP `(N, C)` observation, then applies an action:
//! the vehicle joins the chosen PoP until `t + mean_dwell * r`,
//! `r ~ Exp(1)`, and every PoP's CPU count moves by its increment (clamped
//! to `[0, max_cpus]`). The step reward is the mean of the per-PoP rewards.

mod episode;
mod reward;

pub use episode::{run_episode, Clock, EpisodeRecord, NoClock};
pub use reward::{continuity_scale, per_pop_reward, pop_reward, reward_base, reward_truncnorm, RewardConfig, RewardVariant};

use alloc::vec::Vec;

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::queueing::{Delay, PopQueue, ServiceProfile};
use crate::rng::{self, Rng};
use crate::traffic::{ArrivalEvent, TrafficTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub profile: ServiceProfile,
    pub reward: RewardConfig,
    pub initial_cpus: u32,
    pub mean_dwell_s: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { profile: ServiceProfile::default(), reward: RewardConfig::default(), initial_cpus: 1, mean_dwell_s: 30.0 }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        if self.initial_cpus > self.profile.max_cpus() {
            return Err(Error::CpuDomain { cpus: self.initial_cpus, max: self.profile.max_cpus() });
        }
        if !(self.mean_dwell_s.is_finite() && self.mean_dwell_s > 0.0) {
            return Err(Error::InvalidArgument("mean dwell time must be positive".into()));
        }
        Ok(())
    }
}

/// Draws departure times; the k-th call always uses the k-th draw of the
/// seeded stream, independent of placements.
#[derive(Debug, Clone)]
pub struct DwellSampler {
    rng: Rng,
    mean_s: f64,
}

impl DwellSampler {
    pub fn new(seed: u64, mean_s: f64) -> Self {
        Self { rng: rng::seeded(seed), mean_s }
    }

    pub fn departure(&mut self, arrival_s: f64) -> f64 {
        let r: f64 = Exp1.sample(&mut self.rng);
        arrival_s + self.mean_s * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopObservation {
    pub n_vehicles: u32,
    pub cpus: u32,
}

/// `(N_p, C_p)` for every PoP at `clock_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub per_pop: Vec<PopObservation>,
    pub clock_s: f64,
}

impl SystemState {
    fn of(pops: &[PopQueue], clock_s: f64) -> Self {
        let per_pop = pops.iter().map(|q| PopObservation { n_vehicles: q.n_vehicles(), cpus: q.cpus() }).collect();
        Self { per_pop, clock_s }
    }

    pub fn pops(&self) -> usize {
        self.per_pop.len()
    }

    /// `(N_1, C_1, ..., N_P, C_P)`.
    pub fn interleaved(&self) -> Vec<u32> {
        self.per_pop.iter().flat_map(|o| [o.n_vehicles, o.cpus]).collect()
    }

    pub fn total_vehicles(&self) -> u32 {
        self.per_pop.iter().map(|o| o.n_vehicles).sum()
    }
}

/// Placement plus per-PoP CPU increments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullAction {
    pub placement: usize,
    pub deltas: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub avg_reward: f64,
    pub per_pop_rewards: Vec<f64>,
    /// Transmission plus processing delay of the vehicle that just arrived.
    pub vehicle_delay: Delay,
    pub done: bool,
}

/// The arrival awaiting a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub index: usize,
    pub time_s: f64,
    pub origin: usize,
    pub state: SystemState,
}

#[derive(Debug, Clone)]
pub struct Environment<'t> {
    cfg: EnvConfig,
    events: &'t [ArrivalEvent],
    pops: Vec<PopQueue>,
    cursor: usize,
    dwell: DwellSampler,
    pending: Option<Arrival>,
    clock_s: f64,
}

impl<'t> Environment<'t> {
    /// Fresh environment at the first arrival: every PoP idle on
    /// `initial_cpus` CPUs.
    pub fn new(trace: &'t TrafficTrace, cfg: EnvConfig, dwell_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let first = trace.events().first().ok_or(Error::EmptyTrace)?;
        let pops = (0..trace.pops()).map(|p| PopQueue::new(p, cfg.initial_cpus)).collect();
        let dwell = DwellSampler::new(dwell_seed, cfg.mean_dwell_s);
        Ok(Self { events: trace.events(), pops, cursor: 0, dwell, pending: None, clock_s: first.time_s(), cfg })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &ServiceProfile {
        &self.cfg.profile
    }

    pub fn pops(&self) -> &[PopQueue] {
        &self.pops
    }

    pub fn state(&self) -> SystemState {
        SystemState::of(&self.pops, self.clock_s)
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.events.len()
    }

    pub fn steps_taken(&self) -> usize {
        self.cursor
    }

    /// Expires departed vehicles and reports the next arrival, or `None`
    /// once the trace is exhausted. Repeated calls return the same arrival
    /// until [`Environment::step`] consumes it.
    pub fn peek_arrival(&mut self) -> Option<&Arrival> {
        if self.pending.is_none() {
            let event = *self.events.get(self.cursor)?;
            let t = event.time_s();
            self.clock_s = t;
            for q in &mut self.pops {
                q.expire(t);
            }
            self.pending = Some(Arrival { index: self.cursor, time_s: t, origin: event.pop, state: self.state() });
        }
        self.pending.as_ref()
    }

    pub fn pending_arrival(&self) -> Option<&Arrival> {
        self.pending.as_ref()
    }

    pub fn step(&mut self, action: &FullAction) -> Result<StepOutcome> {
        let pops = self.pops.len();
        if action.placement >= pops {
            return Err(Error::InvalidPlacement { placement: action.placement, pops });
        }
        if action.deltas.len() != pops {
            return Err(Error::ActionShape { got: action.deltas.len(), pops });
        }
        let arrival = self.pending.take().ok_or(Error::NoPendingArrival)?;
        let remote = action.placement != arrival.origin;
        let departure = self.dwell.departure(arrival.time_s);
        self.pops[action.placement].admit(arrival.index as u64, departure, remote)?;

        let max = self.cfg.profile.max_cpus();
        for (q, &delta) in self.pops.iter_mut().zip(&action.deltas) {
            q.scale_by(delta, max);
        }

        let profile = &self.cfg.profile;
        let reward = &self.cfg.reward;
        let per_pop_rewards: Vec<f64> = self.pops.iter().map(|q| per_pop_reward(q, profile, reward)).collect();
        let avg_reward = per_pop_rewards.iter().sum::<f64>() / pops as f64;
        let surcharge = if remote { reward.transmission_ms } else { 0.0 };
        let vehicle_delay = self.pops[action.placement].proc_delay(profile).plus(surcharge);

        self.cursor += 1;
        Ok(StepOutcome { next_state: self.state(), avg_reward, per_pop_rewards, vehicle_delay, done: self.is_done() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn trace(events: &[(f64, usize)], pops: usize) -> TrafficTrace {
        let ev = events.iter().map(|&(t, pop)| ArrivalEvent { t_us: (t * 1e6) as u64, pop }).collect();
        TrafficTrace::new(pops, ev).unwrap()
    }

    #[test]
    fn reset_states() {
        let tr = trace(&[(1.0, 0), (2.0, 4)], 5);
        let env = Environment::new(&tr, EnvConfig::default(), 0).unwrap();
        let s = env.state();
        assert_eq!(s.per_pop.len(), 5);
        assert!(s.per_pop.iter().all(|o| *o == PopObservation { n_vehicles: 0, cpus: 1 }));
        assert_eq!(s.clock_s, 1.0);
        let cfg = EnvConfig { initial_cpus: 3, ..EnvConfig::default() };
        let env = Environment::new(&tr, cfg, 0).unwrap();
        assert!(env.state().per_pop.iter().all(|o| o.cpus == 3));
        let empty = TrafficTrace::new(2, vec![]).unwrap();
        assert!(matches!(Environment::new(&empty, EnvConfig::default(), 0), Err(Error::EmptyTrace)));
    }

    #[test]
    fn peek_is_idempotent_and_expires() {
        let tr = trace(&[(0.0, 0), (1000.0, 0)], 1);
        let mut env = Environment::new(&tr, EnvConfig::default(), 3).unwrap();
        let a = env.peek_arrival().unwrap().clone();
        assert_eq!(env.peek_arrival().unwrap(), &a);
        env.step(&FullAction { placement: 0, deltas: vec![2] }).unwrap();
        // departures average 30 s, so the first vehicle is gone 1000 s later
        let b = env.peek_arrival().unwrap();
        assert_eq!(b.state.per_pop[0].n_vehicles, 0);
        env.step(&FullAction { placement: 0, deltas: vec![0] }).unwrap();
        assert!(env.peek_arrival().is_none());
        assert!(env.is_done());
    }

    #[test]
    fn no_departure_keeps_count() {
        let tr = trace(&[(0.0, 0), (1e-3, 0)], 1);
        let mut env = Environment::new(&tr, EnvConfig::default(), 3).unwrap();
        env.peek_arrival();
        env.step(&FullAction { placement: 0, deltas: vec![1] }).unwrap();
        assert_eq!(env.peek_arrival().unwrap().state.per_pop[0].n_vehicles, 1);
    }

    #[test]
    fn local_and_remote_delays() {
        let p = ServiceProfile::default();
        let tr = trace(&[(0.0, 0), (0.001, 0)], 2);
        let mut env = Environment::new(&tr, EnvConfig::default(), 1).unwrap();
        env.peek_arrival();
        let out = env.step(&FullAction { placement: 0, deltas: vec![4, 0] }).unwrap();
        assert_eq!(out.vehicle_delay, p.processing_delay(5, 1).unwrap());
        env.peek_arrival();
        let out = env.step(&FullAction { placement: 1, deltas: vec![0, 4] }).unwrap();
        let proc = p.processing_delay(5, 1).unwrap().ms().unwrap();
        assert_eq!(out.vehicle_delay, Delay::Finite(proc + 20.0));
        assert!((out.avg_reward - out.per_pop_rewards.iter().sum::<f64>() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clamps_and_rejects_bad_actions() {
        let tr = trace(&[(0.0, 0), (1.0, 1)], 2);
        let mut env = Environment::new(&tr, EnvConfig::default(), 1).unwrap();
        assert!(matches!(env.step(&FullAction { placement: 0, deltas: vec![0, 0] }), Err(Error::NoPendingArrival)));
        env.peek_arrival();
        assert!(env.step(&FullAction { placement: 2, deltas: vec![0, 0] }).is_err());
        assert!(env.step(&FullAction { placement: 0, deltas: vec![0] }).is_err());
        let out = env.step(&FullAction { placement: 0, deltas: vec![5, -5] }).unwrap();
        assert_eq!(out.next_state.per_pop[0].cpus, 5);
        assert_eq!(out.next_state.per_pop[1].cpus, 0);
    }

    #[test]
    fn dwell_draws_do_not_depend_on_placement() {
        let mut a = DwellSampler::new(9, 30.0);
        let mut b = DwellSampler::new(9, 30.0);
        let xs: Vec<f64> = (0..5).map(|i| a.departure(i as f64)).collect();
        let ys: Vec<f64> = (0..5).map(|i| b.departure(i as f64)).collect();
        assert_eq!(xs, ys);
    }
}
