// SPDX-License-Identifier: Apache-2.0

//! Deep deterministic policy gradient scaling agents.
//!
//! The actor maps normalized PoP observations to a real action in
//! `[-1, 1]^k`, which [`dod_discretize`] turns into CPU increments. DDPG-1
//! runs one small agent per PoP on `(N_p, C_p)`; DDPG-N runs a single agent
//! on the whole state and emits every increment.

mod adam;
mod agent;
mod dod;
mod gemm;
mod mlp;
mod replay;

pub use adam::Adam;
pub use agent::{actor_objective, actor_objective_grad, AgentWeights, DdpgAgent};
pub use dod::{dod_discretize, dod_one};
pub use mlp::{polyak_update, Cache, Mlp, OutputActivation, OUTPUT_INIT};
pub use replay::{ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY};

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::agents::{DecisionContext, GreedyPlacement, ScalingPolicy};
use crate::env::{run_episode, EnvConfig, NoClock, StepOutcome, SystemState};
use crate::rng::substream;
use crate::traffic::TrafficTrace;
use crate::{Error, Result};

/// Default divisor of vehicle counts before they enter a network.
pub const VEHICLE_SCALE: f64 = 20.0;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One agent per PoP (DDPG-1).
    PerPop,
    /// One agent for all PoPs (DDPG-N).
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScope {
    /// Every agent learns from the PoP-averaged step reward.
    #[default]
    Averaged,
    /// A per-PoP agent learns from its own PoP's reward.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub scope: Scope,
    /// Defaults to 64 per PoP and 256 globally.
    pub hidden_width: Option<usize>,
    pub hidden_layers: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub tau: f64,
    pub exploration_sigma: f64,
    pub batch_size: usize,
    /// Transitions required before learning starts; defaults to one batch.
    pub warmup: Option<usize>,
    pub replay_capacity: usize,
    /// Learn on every `train_every`-th arrival.
    pub train_every: usize,
    pub reward_scope: RewardScope,
    /// Vehicle counts are divided by this before entering a network.
    pub vehicle_scale: f64,
    pub seed: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            scope: Scope::PerPop,
            hidden_width: None,
            hidden_layers: 2,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            gamma: 0.99,
            tau: 1e-3,
            exploration_sigma: 0.1,
            batch_size: 64,
            warmup: None,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            train_every: 1,
            reward_scope: RewardScope::Averaged,
            vehicle_scale: VEHICLE_SCALE,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn global() -> Self {
        Self { scope: Scope::Global, ..Self::default() }
    }

    pub fn width(&self) -> usize {
        self.hidden_width.unwrap_or(match self.scope {
            Scope::PerPop => 64,
            Scope::Global => 256,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive =
            [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("tau", self.tau), ("vehicle_scale", self.vehicle_scale)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.tau <= 1.0) {
            return Err(Error::InvalidArgument("gamma and tau must lie in [0, 1]".into()));
        }
        if !(self.exploration_sigma >= 0.0 && self.exploration_sigma.is_finite()) {
            return Err(Error::InvalidArgument("exploration sigma must be non-negative".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 || self.width() == 0 {
            return Err(Error::InvalidArgument("batch size, replay capacity, train_every and hidden width must be positive".into()));
        }
        Ok(())
    }
}

/// Serialized trained networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgCheckpoint {
    pub version: u32,
    pub config: DdpgConfig,
    pub pops: usize,
    pub max_cpus: u32,
    pub agents: Vec<AgentWeights>,
}

/// `(N/vehicle_scale, C/max)` for one PoP.
pub fn pop_features(n_vehicles: u32, cpus: u32, max_cpus: u32, vehicle_scale: f64) -> [f64; 2] {
    let c = if max_cpus == 0 { 0.0 } else { cpus as f64 / max_cpus as f64 };
    [n_vehicles as f64 / vehicle_scale, c]
}

#[derive(Debug, Clone)]
struct Pending {
    features: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Option<Vec<f64>>,
}

/// DDPG scaling policy. In training mode it explores, stores transitions
/// and learns online; otherwise it acts greedily on its actor.
#[derive(Debug, Clone)]
pub struct DdpgScaling {
    cfg: DdpgConfig,
    pops: usize,
    max_cpus: u32,
    agents: Vec<DdpgAgent>,
    training: bool,
    pending: Option<Pending>,
    episode: usize,
    step: usize,
    arrivals: u64,
}

impl DdpgScaling {
    pub fn new(cfg: DdpgConfig, pops: usize, max_cpus: u32) -> Result<Self> {
        cfg.validate()?;
        if pops == 0 {
            return Err(Error::InvalidArgument("need at least one PoP".into()));
        }
        let width = cfg.width();
        let agents = match cfg.scope {
            Scope::PerPop => (0..pops).map(|p| DdpgAgent::new(&cfg, 2, 1, width, 4 * p as u64)).collect::<Result<Vec<_>>>()?,
            Scope::Global => alloc::vec![DdpgAgent::new(&cfg, 2 * pops, pops, width, 0)?],
        };
        Ok(Self::assemble(cfg, pops, max_cpus, agents))
    }

    fn assemble(cfg: DdpgConfig, pops: usize, max_cpus: u32, agents: Vec<DdpgAgent>) -> Self {
        Self { cfg, pops, max_cpus, agents, training: false, pending: None, episode: 0, step: 0, arrivals: 0 }
    }

    pub fn from_checkpoint(ckpt: DdpgCheckpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        let expected = match ckpt.config.scope {
            Scope::PerPop => ckpt.pops,
            Scope::Global => 1,
        };
        if ckpt.agents.len() != expected {
            return Err(Error::Dimension { expected, got: ckpt.agents.len() });
        }
        let (ds, da) = match ckpt.config.scope {
            Scope::PerPop => (2, 1),
            Scope::Global => (2 * ckpt.pops, ckpt.pops),
        };
        let agents = ckpt
            .agents
            .into_iter()
            .enumerate()
            .map(|(p, w)| {
                if w.actor.input_width() != ds || w.actor.output_width() != da {
                    return Err(Error::Dimension { expected: ds, got: w.actor.input_width() });
                }
                DdpgAgent::from_weights(w, &ckpt.config, 4 * p as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(ckpt.config, ckpt.pops, ckpt.max_cpus, agents))
    }

    pub fn checkpoint(&self) -> DdpgCheckpoint {
        DdpgCheckpoint {
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            pops: self.pops,
            max_cpus: self.max_cpus,
            agents: self.agents.iter().map(|a| a.weights().clone()).collect(),
        }
    }

    pub fn pops(&self) -> usize {
        self.pops
    }

    pub fn max_cpus(&self) -> u32 {
        self.max_cpus
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn agents(&self) -> &[DdpgAgent] {
        &self.agents
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
        self.pending = None;
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    /// Network inputs, one vector per agent.
    pub fn features(&self, state: &SystemState) -> Vec<Vec<f64>> {
        let per = state.per_pop.iter().map(|o| pop_features(o.n_vehicles, o.cpus, self.max_cpus, self.cfg.vehicle_scale));
        match self.cfg.scope {
            Scope::PerPop => per.map(|f| f.to_vec()).collect(),
            Scope::Global => alloc::vec![per.flatten().collect()],
        }
    }

    fn rewards_for(&self, outcome: &StepOutcome) -> Vec<f64> {
        match (self.cfg.scope, self.cfg.reward_scope) {
            (Scope::PerPop, RewardScope::Local) => outcome.per_pop_rewards.clone(),
            _ => alloc::vec![outcome.avg_reward; self.agents.len()],
        }
    }

    fn learn(&mut self) -> Result<()> {
        for agent in &mut self.agents {
            if let Some((loss, q)) = agent.train_step()? {
                if !loss.is_finite() || !q.is_finite() {
                    let loss = if loss.is_finite() { q } else { loss };
                    return Err(Error::Divergence { episode: self.episode, step: self.step, loss });
                }
            }
        }
        Ok(())
    }
}

impl ScalingPolicy for DdpgScaling {
    fn scale(&mut self, ctx: &DecisionContext<'_>, _placement: usize) -> Result<Vec<i32>> {
        let state = &ctx.arrival.state;
        if state.pops() != self.pops {
            return Err(Error::Dimension { expected: self.pops, got: state.pops() });
        }
        let features = self.features(state);
        if self.training {
            if let Some(Pending { features: prev, actions, rewards: Some(rewards) }) = self.pending.take() {
                for (i, agent) in self.agents.iter_mut().enumerate() {
                    agent.remember(&prev[i], &actions[i], rewards[i], &features[i], false)?;
                }
            }
            self.arrivals += 1;
            if self.arrivals.is_multiple_of(self.cfg.train_every as u64) {
                self.learn()?;
            }
        }
        let explore = self.training;
        let actions = self.agents.iter_mut().zip(&features).map(|(a, f)| a.act(f, explore)).collect::<Result<Vec<_>>>()?;
        let deltas = actions.iter().flat_map(|a| dod_discretize(a, self.max_cpus)).collect();
        if self.training {
            self.pending = Some(Pending { features, actions, rewards: None });
        }
        self.step += 1;
        Ok(deltas)
    }

    fn observe(&mut self, outcome: &StepOutcome) -> Result<()> {
        if !self.training {
            return Ok(());
        }
        let rewards = self.rewards_for(outcome);
        if outcome.done {
            if let Some(p) = self.pending.take() {
                let next = self.features(&outcome.next_state);
                for (i, agent) in self.agents.iter_mut().enumerate() {
                    agent.remember(&p.features[i], &p.actions[i], rewards[i], &next[i], true)?;
                }
            }
        } else if let Some(p) = self.pending.as_mut() {
            p.rewards = Some(rewards);
        }
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        self.pending = None;
        self.episode += 1;
        self.step = 0;
        Ok(())
    }
}

/// Trains `scaler` for `episodes` passes over `trace` with greedy placement.
/// Episode `e` draws dwell times from a seed derived from `(seed, e)`.
/// Returns the mean step reward of every episode.
pub fn train(scaler: &mut DdpgScaling, trace: &TrafficTrace, env: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    train_with(scaler, trace, env, GreedyPlacement::default(), episodes, seed, |_, _| {})
}

/// [`train`] with an explicit placement rule; `on_episode(e, mean_reward)`
/// runs after every episode.
pub fn train_with(
    scaler: &mut DdpgScaling,
    trace: &TrafficTrace,
    env: &EnvConfig,
    placement: GreedyPlacement,
    episodes: usize,
    seed: u64,
    mut on_episode: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let was_training = scaler.is_training();
    scaler.set_training(true);
    let mut curve = Vec::with_capacity(episodes);
    let mut placement = placement;
    for e in 0..episodes {
        let dwell_seed = substream(seed, e as u64).next_u64();
        let record = run_episode(trace, env, dwell_seed, &mut placement, scaler, &NoClock);
        let record = match record {
            Ok(r) => r,
            Err(err) => {
                scaler.set_training(was_training);
                return Err(err);
            }
        };
        curve.push(record.mean_reward());
        on_episode(e, record.mean_reward());
    }
    scaler.set_training(was_training);
    Ok(curve)
}
