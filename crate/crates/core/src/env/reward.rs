// SPDX-License-Identifier: Apache-2.0

//! Delay-shaped rewards.
//!
//! The base reward is `x * exp(-(x^2 - 1) / 2)` with `x = d / d_tgt`: zero
//! at no delay, exactly one at the target and decaying beyond it. The
//! truncated-normal variant keeps the base branch below the target and
//! replaces the upper branch with a scaled normal density centred at the
//! target, truncated to `[0, inf)`.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::math::{normal_cdf, normal_pdf};
use crate::queueing::{Delay, PopQueue, ServiceProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardVariant {
    Base,
    TruncNorm { sigma_ms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub d_tgt_ms: f64,
    /// Round-trip surcharge for a vehicle served away from its origin PoP.
    pub transmission_ms: f64,
    pub variant: RewardVariant,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { d_tgt_ms: 50.0, transmission_ms: 20.0, variant: RewardVariant::Base }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_tgt_ms.is_finite() && self.d_tgt_ms > 0.0) {
            return Err(Error::InvalidArgument("d_tgt must be positive".into()));
        }
        if !(self.transmission_ms.is_finite() && self.transmission_ms >= 0.0) {
            return Err(Error::InvalidArgument("transmission latency must be non-negative".into()));
        }
        if let RewardVariant::TruncNorm { sigma_ms } = self.variant {
            if !(sigma_ms.is_finite() && sigma_ms > 0.0) {
                return Err(Error::InvalidArgument("sigma must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn reward(&self, d: Delay) -> f64 {
        match self.variant {
            RewardVariant::Base => reward_base(d, self.d_tgt_ms),
            RewardVariant::TruncNorm { sigma_ms } => reward_truncnorm(d, self.d_tgt_ms, sigma_ms),
        }
    }
}

pub fn reward_base(d: Delay, d_tgt: f64) -> f64 {
    match d {
        Delay::Overload => 0.0,
        Delay::Finite(d) => {
            let x = d / d_tgt;
            x * libm::exp(-0.5 * (x * x - 1.0))
        }
    }
}

/// Scale `K` that makes the upper branch of [`reward_truncnorm`] equal the
/// base reward at the target.
pub fn continuity_scale(d_tgt: f64, sigma: f64) -> f64 {
    let mass = 1.0 - normal_cdf(-d_tgt / sigma);
    sigma * libm::sqrt(2.0 * PI) * mass * reward_base(Delay::Finite(d_tgt), d_tgt)
}

pub fn reward_truncnorm(d: Delay, d_tgt: f64, sigma: f64) -> f64 {
    match d {
        Delay::Overload => 0.0,
        Delay::Finite(x) if x < d_tgt => reward_base(d, d_tgt),
        Delay::Finite(x) => {
            let k = continuity_scale(d_tgt, sigma);
            let mass = 1.0 - normal_cdf(-d_tgt / sigma);
            k / sigma * normal_pdf((x - d_tgt) / sigma) / mass
        }
    }
}

/// Reward of one PoP holding `n` vehicles (`n_remote` of them from other
/// PoPs) on `cpus` CPUs.
///
/// The transmission surcharge is weighted by the remote share. An idle PoP
/// scores 1 with no CPUs, otherwise it is scored at the sojourn a lone task
/// would see, so idle capacity is penalised.
pub fn pop_reward(profile: &ServiceProfile, cfg: &RewardConfig, cpus: u32, n: u32, n_remote: u32) -> f64 {
    if n == 0 {
        if cpus == 0 {
            return 1.0;
        }
        let mu = profile.service_rate(cpus).expect("cpus within profile");
        return cfg.reward(Delay::Finite(1.0 / mu));
    }
    let d = profile.processing_delay(cpus, n).expect("cpus within profile");
    let surcharge = cfg.transmission_ms * n_remote as f64 / n as f64;
    cfg.reward(d.plus(surcharge))
}

pub fn per_pop_reward(pop: &PopQueue, profile: &ServiceProfile, cfg: &RewardConfig) -> f64 {
    pop_reward(profile, cfg, pop.cpus(), pop.n_vehicles(), pop.n_remote())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TGT: f64 = 50.0;

    #[test]
    fn base_examples() {
        assert_eq!(reward_base(Delay::Finite(TGT), TGT), 1.0);
        assert_eq!(reward_base(Delay::Finite(0.0), TGT), 0.0);
        let r = reward_base(Delay::Finite(2.0 * TGT), TGT);
        assert!((r - 0.44626).abs() < 1e-5, "{r}");
        assert_eq!(reward_base(Delay::Overload, TGT), 0.0);
    }

    #[test]
    fn continuity_scale_examples() {
        // sigma*sqrt(2*pi) = 25.0663 with a truncation factor of 1 - Phi(-5)
        let k = continuity_scale(TGT, 10.0);
        assert!((k - 25.066).abs() < 0.01, "{k}");
        // 1 - Phi(-5/3) = 0.952210 -> 75.1988 * 0.952210
        let k = continuity_scale(TGT, 30.0);
        assert!((k - 71.6052).abs() < 1e-3, "{k}");
        let sigma = 1e-3;
        let k = continuity_scale(TGT, sigma);
        assert!(k < 3e-3);
        assert!((k / sigma - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn truncnorm_examples() {
        assert!((reward_truncnorm(Delay::Finite(TGT), TGT, 10.0) - 1.0).abs() < 1e-12);
        let tail = reward_truncnorm(Delay::Finite(TGT + 30.0), TGT, 10.0);
        assert!(tail < 0.02 && (tail - (-4.5_f64).exp()).abs() < 1e-6, "{tail}");
        assert_eq!(reward_truncnorm(Delay::Finite(20.0), TGT, 10.0), reward_base(Delay::Finite(20.0), TGT));
    }

    #[test]
    fn pop_reward_examples() {
        let p = ServiceProfile::default();
        let cfg = RewardConfig::default();
        let r = pop_reward(&p, &cfg, 2, 1, 0);
        // 1.41352 * exp(-0.49904) by hand
        assert!((r - 0.858184).abs() < 1e-5, "{r}");
        assert_eq!(pop_reward(&p, &cfg, 1, 1, 0), 0.0);
        assert_eq!(pop_reward(&p, &cfg, 0, 0, 0), 1.0);
        let idle = pop_reward(&p, &cfg, 5, 0, 0);
        assert_eq!(idle, reward_base(Delay::Finite(1.0 / p.service_rate(5).unwrap()), TGT));
        // one remote vehicle out of two carries half the surcharge
        let d = p.processing_delay(4, 2).unwrap().ms().unwrap();
        let r = pop_reward(&p, &cfg, 4, 2, 1);
        assert_eq!(r, reward_base(Delay::Finite(d + 10.0), TGT));
    }
}
