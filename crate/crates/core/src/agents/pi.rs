// SPDX-License-Identifier: Apache-2.0

//! Proportional/derivative control of the PoP load.
//!
//! `delta = alpha * (rho - rho_tgt) + beta * (rho - rho_prev)`; one CPU is
//! added when `delta > 1`, removed when `delta < -1`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DecisionContext, ScalingPolicy};
use crate::queueing::Load;
use crate::{Error, Result};

/// Load assumed for a PoP with vehicles but no CPUs.
pub const OVERLOAD_LOAD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho_tgt: f64,
}

impl Default for PiParams {
    fn default() -> Self {
        Self { alpha: 4.0, beta: 0.0, rho_tgt: 0.7 }
    }
}

impl PiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.rho_tgt > 0.0 && self.rho_tgt < 1.0) {
            return Err(Error::InvalidArgument("PI needs alpha, beta >= 0 and 0 < rho_tgt < 1".into()));
        }
        Ok(())
    }
}

fn saturate(load: Load) -> f64 {
    load.value().unwrap_or(OVERLOAD_LOAD)
}

pub fn pi_step(rho_now: Load, rho_prev: Load, params: &PiParams) -> i32 {
    let now = saturate(rho_now);
    let delta = params.alpha * (now - params.rho_tgt) + params.beta * (now - saturate(rho_prev));
    if delta > 1.0 {
        1
    } else if delta < -1.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
pub struct PiScaling {
    params: PiParams,
    previous: Vec<Load>,
}

impl PiScaling {
    pub fn new(params: PiParams) -> Self {
        Self { params, previous: Vec::new() }
    }
}

impl ScalingPolicy for PiScaling {
    fn scale(&mut self, ctx: &DecisionContext<'_>, _placement: usize) -> Result<Vec<i32>> {
        let profile = &ctx.config.profile;
        let loads: Vec<Load> =
            ctx.arrival.state.per_pop.iter().map(|o| profile.load(o.cpus, o.n_vehicles).expect("observed cpus within profile")).collect();
        if self.previous.len() != loads.len() {
            self.previous = loads.clone();
        }
        let deltas = loads.iter().zip(&self.previous).map(|(&now, &prev)| pi_step(now, prev, &self.params)).collect();
        self.previous = loads;
        Ok(deltas)
    }

    fn finish_episode(&mut self) -> Result<()> {
        self.previous.clear();
        Ok(())
    }
}
