// SPDX-License-Identifier: Apache-2.0

//! Exact optimum of the joint placement and scaling problem on tiny
//! instances.
//!
//! The oracle knows every arrival and departure in advance. Once the
//! placements are fixed the vehicle count of every PoP at every step is
//! known, and since a CPU count only affects the reward of its own step the
//! best count can be chosen per PoP and step. [`solve`] therefore enumerates
//! placement vectors only; [`naive_enumerate`] searches placements and CPU
//! vectors jointly through the real environment to cross-check it.

use alloc::vec;
use alloc::vec::Vec;

use crate::agents::{DecisionContext, PlacementPolicy, ScalingPolicy};
use crate::env::{pop_reward, DwellSampler, EnvConfig, Environment, FullAction};
use crate::traffic::TrafficTrace;
use crate::{Error, Result};

pub const DEFAULT_BUDGET: f64 = 1e7;

/// The first `V` arrivals of a trace with their departures drawn up front.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    trace: TrafficTrace,
    departures: Vec<f64>,
    cfg: EnvConfig,
    dwell_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub placements: Vec<usize>,
    /// CPU vector applied at each step.
    pub cpus: Vec<Vec<u32>>,
    /// PoP-averaged reward of each step.
    pub step_rewards: Vec<f64>,
    pub total_reward: f64,
}

impl OracleInstance {
    /// Departures are the same draws an [`Environment`] seeded with
    /// `dwell_seed` makes, so agents replayed on [`OracleInstance::trace`]
    /// see identical dwell times.
    pub fn new(trace: &TrafficTrace, arrivals: usize, cfg: EnvConfig, dwell_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let trace = trace.prefix(arrivals);
        let mut dwell = DwellSampler::new(dwell_seed, cfg.mean_dwell_s);
        let departures = trace.events().iter().map(|e| dwell.departure(e.time_s())).collect();
        Ok(Self { trace, departures, cfg, dwell_seed })
    }

    pub fn trace(&self) -> &TrafficTrace {
        &self.trace
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn dwell_seed(&self) -> u64 {
        self.dwell_seed
    }

    pub fn departures(&self) -> &[f64] {
        &self.departures
    }

    pub fn arrivals(&self) -> usize {
        self.trace.len()
    }

    pub fn pops(&self) -> usize {
        self.trace.pops()
    }

    pub fn max_cpus(&self) -> u32 {
        self.cfg.profile.max_cpus()
    }

    /// Placement vectors `solve` visits.
    pub fn solve_size(&self) -> f64 {
        libm::pow(self.pops() as f64, self.arrivals() as f64)
    }

    /// Joint action sequences `naive_enumerate` visits.
    pub fn naive_size(&self) -> f64 {
        let per_step = self.pops() as f64 * libm::pow(self.max_cpus() as f64 + 1.0, self.pops() as f64);
        libm::pow(per_step, self.arrivals() as f64)
    }
}

fn check_budget(required: f64, budget: f64) -> Result<()> {
    if required > budget {
        return Err(Error::Budget { required, budget });
    }
    Ok(())
}

/// Best CPU count and its reward for one PoP and step; ties keep the
/// smaller count.
fn best_cpus(inst: &OracleInstance, n: u32, n_remote: u32) -> (u32, f64) {
    let (profile, reward) = (&inst.cfg.profile, &inst.cfg.reward);
    let mut best = (0, pop_reward(profile, reward, 0, n, n_remote));
    for c in 1..=inst.max_cpus() {
        let r = pop_reward(profile, reward, c, n, n_remote);
        if r > best.1 {
            best = (c, r);
        }
    }
    best
}

/// Optimal placements and CPU schedule by placement enumeration.
/// Placement vectors are visited in lexicographic order and only a strictly
/// better total replaces the incumbent.
pub fn solve(inst: &OracleInstance, budget: Option<f64>) -> Result<OracleSolution> {
    check_budget(inst.solve_size(), budget.unwrap_or(DEFAULT_BUDGET))?;
    let (v_count, pops) = (inst.arrivals(), inst.pops());
    let times: Vec<f64> = inst.trace.events().iter().map(|e| e.time_s()).collect();
    let origins: Vec<usize> = inst.trace.events().iter().map(|e| e.pop).collect();

    let mut placement = vec![0usize; v_count];
    let mut best: Option<OracleSolution> = None;
    let mut counts = vec![0u32; pops];
    let mut remote = vec![0u32; pops];
    loop {
        let mut total = 0.0;
        let mut step_rewards = Vec::with_capacity(v_count);
        let mut cpus = Vec::with_capacity(v_count);
        for v in 0..v_count {
            counts.iter_mut().for_each(|c| *c = 0);
            remote.iter_mut().for_each(|c| *c = 0);
            for u in 0..=v {
                // same retention rule as the environment: departure >= now
                if u == v || inst.departures[u] >= times[v] {
                    counts[placement[u]] += 1;
                    remote[placement[u]] += u32::from(placement[u] != origins[u]);
                }
            }
            let mut sum = 0.0;
            let mut step_cpus = Vec::with_capacity(pops);
            for p in 0..pops {
                let (c, r) = best_cpus(inst, counts[p], remote[p]);
                sum += r;
                step_cpus.push(c);
            }
            let avg = sum / pops as f64;
            total += avg;
            step_rewards.push(avg);
            cpus.push(step_cpus);
        }
        if best.as_ref().is_none_or(|b| total > b.total_reward) {
            best = Some(OracleSolution { placements: placement.clone(), cpus, step_rewards, total_reward: total });
        }
        // odometer, last arrival fastest
        let mut i = v_count;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one placement vector"));
            }
            i -= 1;
            placement[i] += 1;
            if placement[i] < pops {
                break;
            }
            placement[i] = 0;
        }
    }
}

struct Search {
    pops: usize,
    max_cpus: u32,
    best: Option<OracleSolution>,
    placements: Vec<usize>,
    cpus: Vec<Vec<u32>>,
    step_rewards: Vec<f64>,
}

impl Search {
    fn descend(&mut self, env: &Environment<'_>, total: f64) -> Result<()> {
        let mut probe = env.clone();
        if probe.peek_arrival().is_none() {
            if self.best.as_ref().is_none_or(|b| total > b.total_reward) {
                self.best = Some(OracleSolution {
                    placements: self.placements.clone(),
                    cpus: self.cpus.clone(),
                    step_rewards: self.step_rewards.clone(),
                    total_reward: total,
                });
            }
            return Ok(());
        }
        let choices = self.max_cpus + 1;
        let vectors = (choices as u64).pow(self.pops as u32);
        for p in 0..self.pops {
            for code in 0..vectors {
                let mut target = vec![0u32; self.pops];
                let mut rest = code;
                for slot in target.iter_mut().rev() {
                    *slot = (rest % choices as u64) as u32;
                    rest /= choices as u64;
                }
                let mut next = probe.clone();
                let deltas = next.pops().iter().zip(&target).map(|(q, &c)| c as i32 - q.cpus() as i32).collect();
                let outcome = next.step(&FullAction { placement: p, deltas })?;
                self.placements.push(p);
                self.cpus.push(target);
                self.step_rewards.push(outcome.avg_reward);
                self.descend(&next, total + outcome.avg_reward)?;
                self.placements.pop();
                self.cpus.pop();
                self.step_rewards.pop();
            }
        }
        Ok(())
    }
}

/// Reference optimum by brute force over every placement and absolute CPU
/// vector at every arrival, stepping the real environment.
pub fn naive_enumerate(inst: &OracleInstance, budget: Option<f64>) -> Result<OracleSolution> {
    check_budget(inst.naive_size(), budget.unwrap_or(DEFAULT_BUDGET))?;
    if inst.arrivals() == 0 {
        return Ok(OracleSolution { placements: vec![], cpus: vec![], step_rewards: vec![], total_reward: 0.0 });
    }
    let env = Environment::new(&inst.trace, inst.cfg.clone(), inst.dwell_seed)?;
    let mut search =
        Search { pops: inst.pops(), max_cpus: inst.max_cpus(), best: None, placements: vec![], cpus: vec![], step_rewards: vec![] };
    search.descend(&env, 0.0)?;
    Ok(search.best.expect("non-empty search"))
}

/// `100 (optimal - agent) / optimal`, floored at 0.
pub fn optimality_gap(agent_total: f64, optimal_total: f64) -> Result<f64> {
    if !(optimal_total > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("optimal reward must be positive, got {optimal_total}")));
    }
    Ok((100.0 * (optimal_total - agent_total) / optimal_total).max(0.0))
}

/// Plays back an oracle schedule as a placement and scaling policy.
#[derive(Debug, Clone)]
pub struct OracleReplay {
    solution: OracleSolution,
}

impl OracleReplay {
    pub fn new(solution: OracleSolution) -> Self {
        Self { solution }
    }
}

impl PlacementPolicy for OracleReplay {
    fn place(&mut self, ctx: &DecisionContext<'_>) -> usize {
        self.solution.placements.get(ctx.arrival.index).copied().unwrap_or(ctx.arrival.origin)
    }
}

impl ScalingPolicy for OracleReplay {
    fn scale(&mut self, ctx: &DecisionContext<'_>, _placement: usize) -> Result<Vec<i32>> {
        let target = self.solution.cpus.get(ctx.arrival.index).ok_or(Error::InvalidArgument(alloc::format!(
            "schedule covers {} arrivals, asked for arrival {}",
            self.solution.cpus.len(),
            ctx.arrival.index
        )))?;
        Ok(ctx.pops.iter().zip(target).map(|(q, &c)| c as i32 - q.cpus() as i32).collect())
    }
}
