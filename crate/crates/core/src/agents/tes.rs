// SPDX-License-Identifier: Apache-2.0

//! Flow forecasting with additive Holt-Winters smoothing, and the scaler
//! built on it.
//!
//! Placements are counted per PoP in intervals of `interval_s`. When an
//! interval closes its count feeds the level/trend/seasonal recurrences:
//!
//! ```text
//! s_t = a (f_t - c_{t-L}) + (1 - a)(s_{t-1} + b_{t-1})
//! b_t = b (s_t - s_{t-1}) + (1 - b) b_{t-1}
//! c_t = g (f_t - s_{t-1} - b_{t-1}) + (1 - g) c_{t-L}
//! f_{t+h} = s_t + h b_t + c_{t-L+h}
//! ```
//!
//! The first interval initialises the level to its flow, the trend and all
//! seasonal terms to zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DecisionContext, ScalingPolicy};
use crate::env::RewardConfig;
use crate::queueing::ServiceProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TesConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Flow counting interval `m`.
    pub interval_s: f64,
    /// Forecast horizon `W` in intervals.
    pub window: u32,
    /// Seasonality `L` in intervals.
    pub season_len: u32,
}

impl Default for TesConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.1, gamma: 0.1, interval_s: 1.0, window: 1, season_len: 86_400 }
    }
}

impl TesConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.alpha) && unit(self.beta) && unit(self.gamma)) {
            return Err(Error::InvalidArgument("smoothing constants must lie in [0, 1]".into()));
        }
        if !(self.interval_s.is_finite() && self.interval_s > 0.0) || self.window == 0 || self.season_len == 0 {
            return Err(Error::InvalidArgument("interval, window and season must be positive".into()));
        }
        if self.window > self.season_len {
            return Err(Error::InvalidArgument("forecast window longer than a season".into()));
        }
        Ok(())
    }
}

/// One PoP's smoothing state.
#[derive(Debug, Clone, PartialEq)]
pub struct HoltWinters {
    level: f64,
    trend: f64,
    seasonal: Vec<f64>,
    /// Intervals absorbed so far.
    t: u64,
}

impl HoltWinters {
    pub fn new(season_len: u32) -> Self {
        Self { level: 0.0, trend: 0.0, seasonal: vec![0.0; season_len as usize], t: 0 }
    }

    pub fn observed(&self) -> u64 {
        self.t
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn trend(&self) -> f64 {
        self.trend
    }

    fn slot(&self, t: u64) -> usize {
        (t % self.seasonal.len() as u64) as usize
    }

    pub fn update(&mut self, flow: f64, cfg: &TesConfig) {
        if self.t == 0 {
            self.level = flow;
            self.trend = 0.0;
        } else {
            let slot = self.slot(self.t);
            let season_ago = self.seasonal[slot];
            let (s_prev, b_prev) = (self.level, self.trend);
            self.level = cfg.alpha * (flow - season_ago) + (1.0 - cfg.alpha) * (s_prev + b_prev);
            self.trend = cfg.beta * (self.level - s_prev) + (1.0 - cfg.beta) * b_prev;
            self.seasonal[slot] = cfg.gamma * (flow - s_prev - b_prev) + (1.0 - cfg.gamma) * season_ago;
        }
        self.t += 1;
    }

    /// Forecast `h >= 1` intervals past the last absorbed one, floored at 0.
    pub fn forecast(&self, h: u32) -> f64 {
        if self.t == 0 {
            return self.level.max(0.0);
        }
        let last = self.t - 1;
        let season = self.seasonal[self.slot(last + h as u64)];
        (self.level + h as f64 * self.trend + season).max(0.0)
    }
}

/// Per-PoP flow counters and forecasters.
#[derive(Debug, Clone)]
pub struct TesState {
    cfg: TesConfig,
    models: Vec<HoltWinters>,
    counts: Vec<u32>,
    open_interval: Option<u64>,
    last_time_s: f64,
    closed: u64,
    forecast_max: Vec<f64>,
}

impl TesState {
    pub fn new(pops: usize, cfg: TesConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            models: (0..pops).map(|_| HoltWinters::new(cfg.season_len)).collect(),
            counts: vec![0; pops],
            open_interval: None,
            last_time_s: f64::NEG_INFINITY,
            closed: 0,
            forecast_max: vec![0.0; pops],
            cfg,
        })
    }

    pub fn config(&self) -> &TesConfig {
        &self.cfg
    }

    pub fn model(&self, pop: usize) -> &HoltWinters {
        &self.models[pop]
    }

    /// Largest forecast flow over the current window, refreshed every `W`
    /// closed intervals.
    pub fn forecast_max(&self, pop: usize) -> f64 {
        self.forecast_max[pop]
    }

    /// Forecasts for the next `W` intervals.
    pub fn forecast(&self, pop: usize) -> Vec<f64> {
        (1..=self.cfg.window).map(|h| self.models[pop].forecast(h)).collect()
    }

    fn close_interval(&mut self) {
        for (model, count) in self.models.iter_mut().zip(self.counts.iter_mut()) {
            model.update(*count as f64, &self.cfg);
            *count = 0;
        }
        self.closed += 1;
        if self.closed.is_multiple_of(self.cfg.window as u64) {
            for pop in 0..self.models.len() {
                self.forecast_max[pop] = self.forecast(pop).into_iter().fold(0.0, f64::max);
            }
        }
    }

    /// Advances the interval clock to `now_s`, closing every elapsed
    /// interval (empty ones included).
    pub fn advance(&mut self, now_s: f64) -> Result<()> {
        if now_s < self.last_time_s {
            return Err(Error::OutOfOrder { now: now_s, last: self.last_time_s });
        }
        self.last_time_s = now_s;
        let idx = libm::floor(now_s / self.cfg.interval_s).max(0.0) as u64;
        match self.open_interval {
            None => self.open_interval = Some(idx),
            Some(open) => {
                for _ in open..idx {
                    self.close_interval();
                }
                self.open_interval = Some(idx);
            }
        }
        Ok(())
    }

    /// Counts one vehicle placed on `placed_pop` at `now_s`.
    pub fn observe(&mut self, now_s: f64, placed_pop: usize) -> Result<()> {
        self.advance(now_s)?;
        self.counts[placed_pop] += 1;
        Ok(())
    }
}

/// Fewest CPUs whose processing delay for `n` vehicles fits in `d_tgt`,
/// less the transmission latency when remote vehicles are present. Falls
/// back to `max_cpus` when nothing fits.
pub fn tes_scale(n: u32, profile: &ServiceProfile, cfg: &RewardConfig, remote_present: bool) -> u32 {
    if n == 0 {
        return 0;
    }
    let budget = cfg.d_tgt_ms - if remote_present { cfg.transmission_ms } else { 0.0 };
    (0..=profile.max_cpus())
        .find(|&c| profile.processing_delay(c, n).expect("c within profile").ms().is_some_and(|d| d <= budget))
        .unwrap_or(profile.max_cpus())
}

/// Sizes every PoP for the vehicles it serves plus the forecast arrivals of
/// the coming window.
#[derive(Debug, Clone)]
pub struct TesScaling {
    cfg: TesConfig,
    state: Option<TesState>,
}

impl TesScaling {
    pub fn new(cfg: TesConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: None })
    }

    pub fn state(&self) -> Option<&TesState> {
        self.state.as_ref()
    }
}

impl ScalingPolicy for TesScaling {
    fn scale(&mut self, ctx: &DecisionContext<'_>, placement: usize) -> Result<Vec<i32>> {
        let pops = ctx.pops.len();
        if self.state.as_ref().is_none_or(|s| s.models.len() != pops) {
            self.state = Some(TesState::new(pops, self.cfg)?);
        }
        let state = self.state.as_mut().expect("initialised above");
        state.observe(ctx.arrival.time_s, placement)?;

        let remote_arrival = placement != ctx.arrival.origin;
        let deltas = ctx
            .pops
            .iter()
            .enumerate()
            .map(|(p, q)| {
                let here = p == placement;
                let serving = q.n_vehicles() + u32::from(here);
                let expected = libm::round(state.forecast_max(p)) as u32;
                let remote = q.n_remote() > 0 || (here && remote_arrival);
                let c = tes_scale(serving + expected, &ctx.config.profile, &ctx.config.reward, remote);
                c as i32 - q.cpus() as i32
            })
            .collect();
        Ok(deltas)
    }

    fn finish_episode(&mut self) -> Result<()> {
        self.state = None;
        Ok(())
    }
}
