// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{polyak_update, Cache, Mlp, OutputActivation};
use super::replay::ReplayBuffer;
use super::{Adam, DdpgConfig};
use crate::rng::{substream, Rng};
use crate::{Error, Result};

/// Actor, critic and their slow-moving targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentWeights {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    idx: Vec<usize>,
    states: Vec<f64>,
    next_states: Vec<f64>,
    critic_in: Vec<f64>,
    targets: Vec<f64>,
    upstream: Vec<f64>,
    input_grad: Vec<f64>,
    actor_up: Vec<f64>,
    actor_grads: Vec<f64>,
    critic_grads: Vec<f64>,
    actor_cache: Cache,
    critic_cache: Cache,
}

/// One DDPG learner: networks, optimizers, replay memory and noise.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    weights: AgentWeights,
    opt_actor: Adam,
    opt_critic: Adam,
    replay: ReplayBuffer,
    gamma: f64,
    tau: f64,
    sigma: f64,
    batch_size: usize,
    warmup: usize,
    noise: Rng,
    sampler: Rng,
    scratch: Scratch,
}

/// `(s_1 ++ a_1, ..., s_B ++ a_B)`.
fn concat_rows(states: &[f64], ds: usize, actions: &[f64], da: usize, out: &mut Vec<f64>) {
    out.clear();
    for (s, a) in states.chunks_exact(ds).zip(actions.chunks_exact(da)) {
        out.extend_from_slice(s);
        out.extend_from_slice(a);
    }
}

/// Mean of `Q(s, pi(s))` over the batch and, when `grads` is given, its
/// gradient with respect to the actor parameters (accumulated).
fn actor_objective_into(
    actor: &Mlp,
    critic: &Mlp,
    states: &[f64],
    batch: usize,
    scratch: &mut Scratch,
    grads: Option<&mut [f64]>,
) -> Result<f64> {
    let ds = actor.input_width();
    let da = actor.output_width();
    if critic.input_width() != ds + da || critic.output_width() != 1 {
        return Err(Error::Dimension { expected: ds + da, got: critic.input_width() });
    }
    actor.forward_batch(states, batch, &mut scratch.actor_cache)?;
    concat_rows(states, ds, scratch.actor_cache.output(), da, &mut scratch.critic_in);
    critic.forward_batch(&scratch.critic_in, batch, &mut scratch.critic_cache)?;
    let mean_q = scratch.critic_cache.output().iter().sum::<f64>() / batch as f64;
    let Some(grads) = grads else {
        return Ok(mean_q);
    };
    scratch.upstream.clear();
    scratch.upstream.resize(batch, 1.0 / batch as f64);
    scratch.input_grad.clear();
    scratch.input_grad.resize(batch * (ds + da), 0.0);
    critic.backward_batch(&mut scratch.critic_cache, &scratch.upstream, None, Some(&mut scratch.input_grad))?;
    scratch.actor_up.clear();
    for row in scratch.input_grad.chunks_exact(ds + da) {
        scratch.actor_up.extend_from_slice(&row[ds..]);
    }
    actor.backward_batch(&mut scratch.actor_cache, &scratch.actor_up, Some(grads), None)?;
    Ok(mean_q)
}

/// Mean `Q(s, pi(s))` over `batch` row-major states.
pub fn actor_objective(actor: &Mlp, critic: &Mlp, states: &[f64], batch: usize) -> Result<f64> {
    actor_objective_into(actor, critic, states, batch, &mut Scratch::default(), None)
}

/// Mean `Q(s, pi(s))` and its gradient with respect to the actor parameters,
/// chained through the critic's action input.
pub fn actor_objective_grad(actor: &Mlp, critic: &Mlp, states: &[f64], batch: usize) -> Result<(f64, Vec<f64>)> {
    let mut grads = vec![0.0; actor.n_params()];
    let q = actor_objective_into(actor, critic, states, batch, &mut Scratch::default(), Some(&mut grads))?;
    Ok((q, grads))
}

impl DdpgAgent {
    /// Fresh agent with `cfg.hidden_layers` hidden ELU layers of `width`.
    /// Initial weights, exploration noise and replay sampling use separate
    /// substreams `stream_base..stream_base + 3` of `cfg.seed`.
    pub fn new(cfg: &DdpgConfig, state_dim: usize, action_dim: usize, width: usize, stream_base: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = substream(cfg.seed, stream_base);
        let mut sizes = vec![state_dim];
        sizes.extend(core::iter::repeat_n(width, cfg.hidden_layers));
        sizes.push(action_dim);
        let actor = Mlp::init(&sizes, OutputActivation::Tanh, &mut init)?;
        sizes[0] = state_dim + action_dim;
        *sizes.last_mut().expect("output layer") = 1;
        let critic = Mlp::init(&sizes, OutputActivation::Linear, &mut init)?;
        Self::from_parts(actor, critic, cfg, stream_base)
    }

    /// Agent around given networks; targets start as copies.
    pub fn from_parts(actor: Mlp, critic: Mlp, cfg: &DdpgConfig, stream_base: u64) -> Result<Self> {
        let weights = AgentWeights { target_actor: actor.clone(), target_critic: critic.clone(), actor, critic };
        Self::from_weights(weights, cfg, stream_base)
    }

    pub fn from_weights(weights: AgentWeights, cfg: &DdpgConfig, stream_base: u64) -> Result<Self> {
        cfg.validate()?;
        let AgentWeights { actor, critic, target_actor, target_critic } = &weights;
        let (ds, da) = (actor.input_width(), actor.output_width());
        if critic.input_width() != ds + da || critic.output_width() != 1 {
            return Err(Error::Dimension { expected: ds + da, got: critic.input_width() });
        }
        if target_actor.sizes() != actor.sizes() || target_critic.sizes() != critic.sizes() {
            return Err(Error::InvalidArgument("target networks must mirror their sources".into()));
        }
        Ok(Self {
            opt_actor: Adam::new(actor.n_params(), cfg.lr_actor),
            opt_critic: Adam::new(critic.n_params(), cfg.lr_critic),
            replay: ReplayBuffer::new(cfg.replay_capacity, ds, da)?,
            gamma: cfg.gamma,
            tau: cfg.tau,
            sigma: cfg.exploration_sigma,
            batch_size: cfg.batch_size,
            warmup: cfg.warmup.unwrap_or(cfg.batch_size).max(1),
            noise: substream(cfg.seed, stream_base + 1),
            sampler: substream(cfg.seed, stream_base + 2),
            scratch: Scratch::default(),
            weights,
        })
    }

    pub fn weights(&self) -> &AgentWeights {
        &self.weights
    }

    pub fn actor(&self) -> &Mlp {
        &self.weights.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.weights.critic
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn state_dim(&self) -> usize {
        self.weights.actor.input_width()
    }

    pub fn action_dim(&self) -> usize {
        self.weights.actor.output_width()
    }

    /// Actor output for `features`, with `N(0, sigma)` noise per component
    /// and clipping to `[-1, 1]` when exploring.
    pub fn act(&mut self, features: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut a = self.weights.actor.forward(features)?;
        if explore {
            for x in &mut a {
                let z: f64 = self.noise.sample(StandardNormal);
                *x = (*x + self.sigma * z).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    pub fn remember(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) -> Result<()> {
        self.replay.push(state, action, reward, next_state, done)
    }

    /// One Adam step on the mean squared TD error over replay rows `batch`.
    /// Returns the loss before the step.
    pub fn critic_update(&mut self, batch: &[usize]) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (ds, da) = (self.state_dim(), self.action_dim());
        let Self { weights, replay, scratch: sc, gamma, .. } = self;

        sc.states.clear();
        sc.next_states.clear();
        for &i in batch {
            let t = replay.get(i);
            sc.states.extend_from_slice(t.state);
            sc.next_states.extend_from_slice(t.next_state);
        }
        // y = r + gamma * Q'(s', pi'(s')) for non-terminal rows
        weights.target_actor.forward_batch(&sc.next_states, n, &mut sc.actor_cache)?;
        concat_rows(&sc.next_states, ds, sc.actor_cache.output(), da, &mut sc.critic_in);
        weights.target_critic.forward_batch(&sc.critic_in, n, &mut sc.critic_cache)?;
        sc.targets.clear();
        for (&i, &q_next) in batch.iter().zip(sc.critic_cache.output()) {
            let t = replay.get(i);
            sc.targets.push(if t.done { t.reward } else { t.reward + *gamma * q_next });
        }

        sc.critic_in.clear();
        for &i in batch {
            let t = replay.get(i);
            sc.critic_in.extend_from_slice(t.state);
            sc.critic_in.extend_from_slice(t.action);
        }
        weights.critic.forward_batch(&sc.critic_in, n, &mut sc.critic_cache)?;
        let mut loss = 0.0;
        sc.upstream.clear();
        for (&q, &y) in sc.critic_cache.output().iter().zip(&sc.targets) {
            let e = q - y;
            loss += e * e;
            sc.upstream.push(2.0 * e / n as f64);
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Ok(loss);
        }
        sc.critic_grads.clear();
        sc.critic_grads.resize(weights.critic.n_params(), 0.0);
        weights.critic.backward_batch(&mut sc.critic_cache, &sc.upstream, Some(&mut sc.critic_grads), None)?;
        self.opt_critic.step(self.weights.critic.params_mut(), &self.scratch.critic_grads)?;
        Ok(loss)
    }

    /// One Adam ascent step on mean `Q(s, pi(s))` over replay rows `batch`.
    /// Returns the objective before the step.
    pub fn actor_update(&mut self, batch: &[usize]) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let Self { weights, replay, scratch: sc, .. } = self;
        sc.states.clear();
        for &i in batch {
            sc.states.extend_from_slice(replay.get(i).state);
        }
        let mut grads = core::mem::take(&mut sc.actor_grads);
        grads.clear();
        grads.resize(weights.actor.n_params(), 0.0);
        let states = core::mem::take(&mut sc.states);
        let q = actor_objective_into(&weights.actor, &weights.critic, &states, n, sc, Some(&mut grads));
        sc.states = states;
        let q = q?;
        if q.is_finite() {
            grads.iter_mut().for_each(|g| *g = -*g);
            self.opt_actor.step(self.weights.actor.params_mut(), &grads)?;
        }
        self.scratch.actor_grads = grads;
        Ok(q)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let w = &mut self.weights;
        polyak_update(&mut w.target_actor, &w.actor, self.tau)?;
        polyak_update(&mut w.target_critic, &w.critic, self.tau)
    }

    /// Samples a batch and runs critic update, actor update and target
    /// tracking. `None` until the replay holds `warmup` transitions;
    /// otherwise `(critic loss, mean Q)`, which may be non-finite.
    pub fn train_step(&mut self) -> Result<Option<(f64, f64)>> {
        if self.replay.len() < self.warmup {
            return Ok(None);
        }
        let mut idx = core::mem::take(&mut self.scratch.idx);
        self.replay.sample_indices(self.batch_size, &mut self.sampler, &mut idx);
        let loss = self.critic_update(&idx);
        let out = match loss {
            Ok(loss) if loss.is_finite() => self.actor_update(&idx).map(|q| (loss, q)),
            Ok(loss) => Ok((loss, f64::NAN)),
            Err(e) => Err(e),
        };
        self.scratch.idx = idx;
        let out = out?;
        if out.0.is_finite() && out.1.is_finite() {
            self.soft_update()?;
        }
        Ok(Some(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn cfg() -> DdpgConfig {
        DdpgConfig { batch_size: 4, ..DdpgConfig::default() }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn act_is_deterministic() {
        let mut agent = DdpgAgent::new(&cfg(), 2, 1, 16, 0).unwrap();
        let a = agent.act(&[0.1, 0.2], false).unwrap();
        assert_eq!(a, agent.act(&[0.1, 0.2], false).unwrap());
        let mut twin = DdpgAgent::new(&cfg(), 2, 1, 16, 0).unwrap();
        let noisy = agent.act(&[0.1, 0.2], true).unwrap();
        assert_eq!(noisy, twin.act(&[0.1, 0.2], true).unwrap());
        assert_ne!(noisy, a);
        assert!(noisy.iter().all(|x| x.abs() <= 1.0));

        let zero = Mlp::zeros(&[2, 4, 1], OutputActivation::Tanh).unwrap();
        let critic = Mlp::zeros(&[3, 4, 1], OutputActivation::Linear).unwrap();
        let mut z = DdpgAgent::from_parts(zero, critic, &cfg(), 0).unwrap();
        assert_eq!(z.act(&[0.5, 0.5], false).unwrap(), [0.0]);
    }

    #[test]
    fn regression_when_gamma_is_zero() {
        let c = DdpgConfig { gamma: 0.0, lr_critic: 1e-2, ..cfg() };
        let mut agent = DdpgAgent::new(&c, 2, 1, 16, 3).unwrap();
        agent.remember(&[0.2, 0.4], &[0.3], 0.8, &[0.0, 0.0], false).unwrap();
        let first = agent.critic_update(&[0]).unwrap();
        let mut last = first;
        for _ in 0..500 {
            last = agent.critic_update(&[0]).unwrap();
        }
        assert!(first > 0.5 && last < 1e-6, "{first} -> {last}");
    }

    #[test]
    fn zero_problem_has_zero_loss() {
        let actor = Mlp::zeros(&[2, 4, 1], OutputActivation::Tanh).unwrap();
        let critic = Mlp::zeros(&[3, 4, 1], OutputActivation::Linear).unwrap();
        let mut agent = DdpgAgent::from_parts(actor, critic, &cfg(), 0).unwrap();
        agent.remember(&[0.5, 0.5], &[0.0], 0.0, &[0.5, 0.5], false).unwrap();
        assert_eq!(agent.critic_update(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn repeated_rows_match_single_row() {
        let mut a = DdpgAgent::new(&cfg(), 2, 1, 8, 5).unwrap();
        a.remember(&[0.1, 0.9], &[-0.4], 0.6, &[0.2, 0.8], false).unwrap();
        let mut b = a.clone();
        let la = a.critic_update(&[0]).unwrap();
        let lb = b.critic_update(&[0, 0, 0, 0]).unwrap();
        assert!((la - lb).abs() < 1e-15);
        for (x, y) in a.critic().params().iter().zip(b.critic().params()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn actor_climbs_linear_critic() {
        // Q(s, a) = a
        let critic = Mlp::from_params(&[2, 1], OutputActivation::Linear, vec![0.0, 1.0, 0.0]).unwrap();
        let actor = Mlp::init(&[1, 8, 1], OutputActivation::Tanh, &mut seeded(9)).unwrap();
        let mut agent = DdpgAgent::from_parts(actor, critic.clone(), &DdpgConfig { lr_actor: 1e-2, ..cfg() }, 0).unwrap();
        agent.remember(&[0.5], &[0.0], 0.0, &[0.5], false).unwrap();
        let mut last = agent.act(&[0.5], false).unwrap()[0];
        for _ in 0..300 {
            agent.actor_update(&[0]).unwrap();
            let now = agent.act(&[0.5], false).unwrap()[0];
            assert!(now >= last);
            last = now;
        }
        assert!(last > 0.99, "{last}");
        assert_eq!(agent.critic(), &critic);
    }

    #[test]
    fn constant_critic_leaves_actor_alone() {
        let critic = Mlp::from_params(&[3, 1], OutputActivation::Linear, vec![0.0, 0.0, 0.0, 2.0]).unwrap();
        let actor = Mlp::init(&[2, 4, 1], OutputActivation::Tanh, &mut seeded(4)).unwrap();
        let mut agent = DdpgAgent::from_parts(actor.clone(), critic, &cfg(), 0).unwrap();
        agent.remember(&[0.5, 0.1], &[0.0], 0.0, &[0.5, 0.1], false).unwrap();
        let (q, g) = actor_objective_grad(agent.actor(), agent.critic(), &[0.5, 0.1], 1).unwrap();
        assert_eq!(q, 2.0);
        assert!(g.iter().all(|&x| x == 0.0));
        agent.actor_update(&[0]).unwrap();
        assert_eq!(agent.actor(), &actor);
    }

    #[test]
    fn composed_gradient_matches_differences() {
        let mut rng = seeded(21);
        let mut actor = Mlp::init(&[3, 6, 6, 2], OutputActivation::Tanh, &mut rng).unwrap();
        actor.params_mut().iter_mut().for_each(|p| *p *= 4.0);
        let critic = Mlp::init(&[5, 6, 6, 1], OutputActivation::Linear, &mut rng).unwrap();
        let states: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let (_, g) = actor_objective_grad(&actor, &critic, &states, 3).unwrap();
        let h = 1e-5;
        for i in 0..actor.n_params() {
            let mut probe = actor.clone();
            probe.params_mut()[i] += h;
            let up = actor_objective(&probe, &critic, &states, 3).unwrap();
            probe.params_mut()[i] -= 2.0 * h;
            let down = actor_objective(&probe, &critic, &states, 3).unwrap();
            let num = (up - down) / (2.0 * h);
            assert!(rel_err(g[i], num) < 1e-4, "param {i}: {} vs {num}", g[i]);
        }
    }

    #[test]
    fn warmup_and_training_step() {
        let mut agent = DdpgAgent::new(&cfg(), 2, 1, 8, 0).unwrap();
        for i in 0..3 {
            agent.remember(&[0.1, i as f64], &[0.0], 1.0, &[0.1, 0.0], false).unwrap();
            assert_eq!(agent.train_step().unwrap(), None);
        }
        agent.remember(&[0.1, 0.0], &[0.0], 1.0, &[0.1, 0.0], true).unwrap();
        let before = agent.weights().target_critic.clone();
        let (loss, q) = agent.train_step().unwrap().unwrap();
        assert!(loss.is_finite() && q.is_finite());
        assert_ne!(agent.weights().target_critic, before);
    }
}
