// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

pub const DEFAULT_REPLAY_CAPACITY: usize = 1_000_000;

/// One transition, borrowed from the buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    pub reward: f64,
    pub next_state: &'a [f64],
    pub done: bool,
}

/// Fixed-capacity FIFO of transitions stored in flat rows. Storage grows on
/// demand up to `capacity`, then the oldest row is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            head: 0,
            pushed: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Transitions pushed over the buffer's lifetime.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) -> Result<()> {
        let (s, a) = (self.state_dim, self.action_dim);
        for (len, want) in [(state.len(), s), (action.len(), a), (next_state.len(), s)] {
            if len != want {
                return Err(Error::Dimension { expected: want, got: len });
            }
        }
        if self.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.dones.push(done);
        } else {
            let i = self.head;
            self.states[i * s..(i + 1) * s].copy_from_slice(state);
            self.actions[i * a..(i + 1) * a].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_states[i * s..(i + 1) * s].copy_from_slice(next_state);
            self.dones[i] = done;
        }
        self.head = (self.head + 1) % self.capacity;
        self.pushed += 1;
        Ok(())
    }

    /// Row `i` in storage order (not insertion order once the ring wraps).
    pub fn get(&self, i: usize) -> Transition<'_> {
        let (s, a) = (self.state_dim, self.action_dim);
        Transition {
            state: &self.states[i * s..(i + 1) * s],
            action: &self.actions[i * a..(i + 1) * a],
            reward: self.rewards[i],
            next_state: &self.next_states[i * s..(i + 1) * s],
            done: self.dones[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Transition<'_>> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// `n` row indices drawn uniformly with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng, out: &mut Vec<usize>) {
        out.clear();
        let len = self.len();
        if len == 0 {
            return;
        }
        out.extend((0..n).map(|_| rng.random_range(0..len)));
    }
}
