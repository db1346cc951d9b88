// SPDX-License-Identifier: Apache-2.0

use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{DecisionContext, PlacementPolicy};
use crate::env::SystemState;
use crate::queueing::{Delay, ServiceProfile};

/// Places each vehicle where transmission plus processing delay is lowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyPlacement {
    /// Evaluate each candidate with the arriving vehicle already counted.
    pub include_candidate: bool,
}

impl Default for GreedyPlacement {
    fn default() -> Self {
        Self { include_candidate: true }
    }
}

impl PlacementPolicy for GreedyPlacement {
    fn place(&mut self, ctx: &DecisionContext<'_>) -> usize {
        greedy_place(&ctx.arrival.state, ctx.arrival.origin, &ctx.config.profile, ctx.config.reward.transmission_ms, self.include_candidate)
    }
}

pub fn greedy_place(state: &SystemState, origin: usize, profile: &ServiceProfile, transmission_ms: f64, include_candidate: bool) -> usize {
    let extra = u32::from(include_candidate);
    let delays =
        state.per_pop.iter().map(|o| profile.processing_delay(o.cpus, o.n_vehicles + extra).expect("observed cpus within profile"));
    greedy_choice(delays, origin, transmission_ms)
}

/// Argmin of `transmission + delay`; overloaded PoPs rank last. Ties go to
/// the origin, then to the lowest index.
pub fn greedy_choice(delays: impl IntoIterator<Item = Delay>, origin: usize, transmission_ms: f64) -> usize {
    let key = |p: usize, d: Delay| {
        let l = if p == origin { 0.0 } else { transmission_ms };
        (d.plus(l).as_ms(), p != origin, p)
    };
    let mut best: Option<(f64, bool, usize)> = None;
    for (p, d) in delays.into_iter().enumerate() {
        let k = key(p, d);
        let better = match best {
            None => true,
            Some(b) => match k.0.total_cmp(&b.0) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => (k.1, k.2) < (b.1, b.2),
            },
        };
        if better {
            best = Some(k);
        }
    }
    best.map(|b| b.2).unwrap_or(origin)
}
