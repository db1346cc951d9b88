// SPDX-License-Identifier: Apache-2.0

use alloc::vec;

use alloc::vec::Vec;

use super::{DecisionContext, GreedyPlacement, ScalingPolicy};
use crate::env::{run_episode, EnvConfig, NoClock};
use crate::traffic::TrafficTrace;
use crate::{Error, Result};

/// Holds every PoP at a fixed CPU count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantScaling {
    target: Vec<u32>,
}

impl ConstantScaling {
    pub fn new(target: Vec<u32>) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &[u32] {
        &self.target
    }
}

impl ScalingPolicy for ConstantScaling {
    fn scale(&mut self, ctx: &DecisionContext<'_>, _placement: usize) -> Result<Vec<i32>> {
        if self.target.len() != ctx.pops.len() {
            return Err(Error::Dimension { expected: ctx.pops.len(), got: self.target.len() });
        }
        Ok(ctx.pops.iter().zip(&self.target).map(|(q, &c)| c as i32 - q.cpus() as i32).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnstSearch {
    pub cpus: Vec<u32>,
    pub total_reward: f64,
    pub candidates: u64,
}

/// Largest number of PoPs searched without an explicit budget.
const DEFAULT_MAX_POPS: usize = 5;

/// Exhaustive search over constant CPU vectors in `{0..max_cpus}^P` with
/// greedy placement, maximising the episode's total reward on `trace`.
/// Ties keep the lexicographically smallest vector.
///
/// Without `max_candidates` the search is limited to at most five PoPs.
pub fn cnst_search(
    trace: &TrafficTrace,
    cfg: &EnvConfig,
    greedy: GreedyPlacement,
    dwell_seed: u64,
    max_candidates: Option<u64>,
) -> Result<CnstSearch> {
    let pops = trace.pops();
    let choices = cfg.profile.max_cpus() as u64 + 1;
    let candidates = (0..pops).try_fold(1u64, |acc, _| acc.checked_mul(choices));
    let allowed = match (candidates, max_candidates) {
        (None, _) => false,
        (Some(_), None) => pops <= DEFAULT_MAX_POPS,
        (Some(n), Some(budget)) => n <= budget,
    };
    if !allowed {
        let required = libm::pow(choices as f64, pops as f64);
        let budget = max_candidates.map_or(libm::pow(choices as f64, DEFAULT_MAX_POPS as f64), |b| b as f64);
        return Err(Error::Budget { required, budget });
    }
    let candidates = candidates.expect("checked above");

    let mut current = vec![0u32; pops];
    let mut best: Option<(Vec<u32>, f64)> = None;
    for _ in 0..candidates {
        let mut placement = greedy;
        let mut scaling = ConstantScaling::new(current.clone());
        let total = run_episode(trace, cfg, dwell_seed, &mut placement, &mut scaling, &NoClock)?.total_reward();
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            best = Some((current.clone(), total));
        }
        // odometer, last PoP fastest, so candidates come in lexicographic order
        for digit in current.iter_mut().rev() {
            *digit += 1;
            if (*digit as u64) < choices {
                break;
            }
            *digit = 0;
        }
    }
    let (cpus, total_reward) = best.expect("at least one candidate");
    Ok(CnstSearch { cpus, total_reward, candidates })
}
