// SPDX-License-Identifier: Apache-2.0

//! Placement and scaling policies.
//!
//! Every solution places vehicles with the same greedy rule and differs in
//! how it scales CPUs: a constant vector found by exhaustive search, a PI
//! controller on the PoP load, a Holt-Winters flow forecaster, or a DDPG
//! actor (see [`crate::ddpg`]).

mod cnst;
mod greedy;
mod pi;
mod tes;

pub use cnst::{cnst_search, CnstSearch, ConstantScaling};
pub use greedy::{greedy_choice, greedy_place, GreedyPlacement};
pub use pi::{pi_step, PiParams, PiScaling, OVERLOAD_LOAD};
pub use tes::{tes_scale, HoltWinters, TesConfig, TesScaling, TesState};

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{Arrival, EnvConfig, StepOutcome};
use crate::queueing::PopQueue;
use crate::Result;

/// What a policy may look at when a vehicle arrives.
pub struct DecisionContext<'a> {
    pub arrival: &'a Arrival,
    pub pops: &'a [PopQueue],
    pub config: &'a EnvConfig,
}

pub trait PlacementPolicy {
    fn place(&mut self, ctx: &DecisionContext<'_>) -> usize;
}

pub trait ScalingPolicy {
    /// Per-PoP CPU increments for the current arrival, which is being
    /// placed on `placement`.
    fn scale(&mut self, ctx: &DecisionContext<'_>, placement: usize) -> Result<Vec<i32>>;

    fn observe(&mut self, _outcome: &StepOutcome) -> Result<()> {
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<T: PlacementPolicy + ?Sized> PlacementPolicy for &mut T {
    fn place(&mut self, ctx: &DecisionContext<'_>) -> usize {
        (**self).place(ctx)
    }
}

impl<T: ScalingPolicy + ?Sized> ScalingPolicy for &mut T {
    fn scale(&mut self, ctx: &DecisionContext<'_>, placement: usize) -> Result<Vec<i32>> {
        (**self).scale(ctx, placement)
    }
    fn observe(&mut self, outcome: &StepOutcome) -> Result<()> {
        (**self).observe(outcome)
    }
    fn finish_episode(&mut self) -> Result<()> {
        (**self).finish_episode()
    }
}

/// Keeps every vehicle at its origin PoP.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalPlacement;

impl PlacementPolicy for LocalPlacement {
    fn place(&mut self, ctx: &DecisionContext<'_>) -> usize {
        ctx.arrival.origin
    }
}

/// Never changes CPU counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoScaling;

impl ScalingPolicy for NoScaling {
    fn scale(&mut self, ctx: &DecisionContext<'_>, _placement: usize) -> Result<Vec<i32>> {
        Ok(vec![0; ctx.pops.len()])
    }
}
