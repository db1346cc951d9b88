// SPDX-License-Identifier: Apache-2.0

//! PoP service model.
//!
//! A PoP with `c` active CPUs processes frames at rate
//! `mu(c) = 1 / (decode_ms(c) + analyze_ms(c))` frames/ms. Each assigned
//! vehicle offers `lambda` frames/ms, so with `n` vehicles the PoP behaves as
//! an M/G/1-PS queue with mean sojourn `1 / (mu(c) - lambda * n)` while
//! stable. Overload is a value, not an error.

mod ps_sim;
mod table;

pub use ps_sim::{simulate_ps_queue, ServiceDiscipline};
pub use table::{Assignment, Delay, Load, PopQueue, VehicleId};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// H.265/HEVC stream at 29.5 fps, in frames per millisecond.
pub const DEFAULT_TASK_RATE: f64 = 0.0295;

const DEFAULT_DECODE_MS: [f64; 5] = [8.47, 4.41, 3.05, 2.37, 2.03];
const DEFAULT_ANALYZE_MS: [f64; 5] = [37.0, 18.50, 12.33, 9.25, 7.40];

/// Per-frame decode/analysis cost as a function of the CPU count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct ServiceProfile {
    decode_ms: Vec<f64>,
    analyze_ms: Vec<f64>,
    task_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    decode_ms_per_frame: Vec<f64>,
    analyze_ms_per_frame: Vec<f64>,
    task_rate_per_vehicle: f64,
}

impl TryFrom<RawProfile> for ServiceProfile {
    type Error = Error;
    fn try_from(raw: RawProfile) -> Result<Self> {
        ServiceProfile::new(raw.decode_ms_per_frame, raw.analyze_ms_per_frame, raw.task_rate_per_vehicle)
    }
}

impl From<ServiceProfile> for RawProfile {
    fn from(p: ServiceProfile) -> Self {
        RawProfile { decode_ms_per_frame: p.decode_ms, analyze_ms_per_frame: p.analyze_ms, task_rate_per_vehicle: p.task_rate }
    }
}

impl Default for ServiceProfile {
    fn default() -> Self {
        Self::new(DEFAULT_DECODE_MS.to_vec(), DEFAULT_ANALYZE_MS.to_vec(), DEFAULT_TASK_RATE).expect("built-in table is valid")
    }
}

impl ServiceProfile {
    /// `decode_ms[i]` and `analyze_ms[i]` are the per-frame costs with `i + 1` CPUs.
    pub fn new(decode_ms: Vec<f64>, analyze_ms: Vec<f64>, task_rate: f64) -> Result<Self> {
        if decode_ms.is_empty() {
            return Err(Error::Profile("at least one CPU row is required".into()));
        }
        if decode_ms.len() != analyze_ms.len() {
            return Err(Error::Profile("decode and analyze tables differ in length".into()));
        }
        if u32::try_from(decode_ms.len()).is_err() {
            return Err(Error::Profile("table too long".into()));
        }
        for table in [&decode_ms, &analyze_ms] {
            if table.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::Profile("per-frame times must be positive and finite".into()));
            }
            if table.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Profile("per-frame times must strictly decrease with CPUs".into()));
            }
        }
        if !(task_rate.is_finite() && task_rate > 0.0) {
            return Err(Error::Profile("task rate must be positive".into()));
        }
        Ok(Self { decode_ms, analyze_ms, task_rate })
    }

    pub fn max_cpus(&self) -> u32 {
        self.decode_ms.len() as u32
    }

    /// Frames per millisecond offered by one vehicle.
    pub fn task_rate(&self) -> f64 {
        self.task_rate
    }

    pub fn decode_ms(&self) -> &[f64] {
        &self.decode_ms
    }

    pub fn analyze_ms(&self) -> &[f64] {
        &self.analyze_ms
    }

    /// Same table limited to the first `max_cpus` rows.
    pub fn truncated(&self, max_cpus: u32) -> Result<Self> {
        if max_cpus == 0 || max_cpus > self.max_cpus() {
            return Err(Error::CpuDomain { cpus: max_cpus, max: self.max_cpus() });
        }
        let m = max_cpus as usize;
        Self::new(self.decode_ms[..m].to_vec(), self.analyze_ms[..m].to_vec(), self.task_rate)
    }

    fn check(&self, cpus: u32) -> Result<()> {
        if cpus > self.max_cpus() {
            Err(Error::CpuDomain { cpus, max: self.max_cpus() })
        } else {
            Ok(())
        }
    }

    /// Frames per millisecond with `cpus` CPUs; zero CPUs serve nothing.
    pub fn service_rate(&self, cpus: u32) -> Result<f64> {
        self.check(cpus)?;
        if cpus == 0 {
            return Ok(0.0);
        }
        let i = cpus as usize - 1;
        Ok(1.0 / (self.decode_ms[i] + self.analyze_ms[i]))
    }

    /// Mean sojourn in milliseconds with `vehicles` assigned vehicles.
    pub fn processing_delay(&self, cpus: u32, vehicles: u32) -> Result<Delay> {
        let mu = self.service_rate(cpus)?;
        let offered = self.task_rate * vehicles as f64;
        Ok(if mu > offered { Delay::Finite(1.0 / (mu - offered)) } else { Delay::Overload })
    }

    pub fn load(&self, cpus: u32, vehicles: u32) -> Result<Load> {
        let mu = self.service_rate(cpus)?;
        Ok(if vehicles == 0 {
            Load::Finite(0.0)
        } else if mu > 0.0 {
            Load::Finite(self.task_rate * vehicles as f64 / mu)
        } else {
            Load::Overload
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn service_rate_examples() {
        let p = ServiceProfile::default();
        assert!(close(p.service_rate(1).unwrap(), 1.0 / 45.47, 1e-15));
        assert!(close(p.service_rate(1).unwrap(), 0.021993, 1e-6));
        assert!(close(p.service_rate(5).unwrap(), 0.106045, 1e-6));
        assert_eq!(p.service_rate(0).unwrap(), 0.0);
        assert!(matches!(p.service_rate(6), Err(Error::CpuDomain { cpus: 6, max: 5 })));
    }

    #[test]
    fn rounded_rates_match_table_row() {
        // The published row reads 0.06 at c=3, but 1/15.38 = 0.06502 rounds to 0.07.
        let p = ServiceProfile::default();
        let shown = [0.02, 0.04, 0.07, 0.09, 0.11];
        for (c, want) in (1..=5).zip(shown) {
            let mu = p.service_rate(c).unwrap();
            assert!(close((mu * 100.0).round() / 100.0, want, 1e-12), "c={c} mu={mu}");
        }
    }

    #[test]
    fn processing_delay_examples() {
        let p = ServiceProfile::default();
        let d = p.processing_delay(2, 1).unwrap().ms().unwrap();
        assert!(close(d, 70.68, 0.01), "{d}");
        assert_eq!(p.processing_delay(1, 1).unwrap(), Delay::Overload);
        let d = p.processing_delay(5, 0).unwrap().ms().unwrap();
        assert!(close(d, 9.43, 0.005), "{d}");
        assert_eq!(p.processing_delay(0, 0).unwrap(), Delay::Overload);
    }

    #[test]
    fn load_examples() {
        let p = ServiceProfile::default();
        let l = p.load(2, 1).unwrap().value().unwrap();
        assert!(close(l, 0.67585, 1e-5), "{l}");
        for c in 1..=5 {
            assert_eq!(p.load(c, 0).unwrap(), Load::Finite(0.0));
        }
        assert_eq!(p.load(0, 3).unwrap(), Load::Overload);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(ServiceProfile::new(alloc::vec![2.0, 3.0], alloc::vec![2.0, 1.0], 0.1).is_err());
        assert!(ServiceProfile::new(alloc::vec![2.0], alloc::vec![-1.0], 0.1).is_err());
        assert!(ServiceProfile::new(alloc::vec![2.0], alloc::vec![1.0], 0.0).is_err());
        assert!(ServiceProfile::new(alloc::vec![], alloc::vec![], 0.1).is_err());
    }

    #[test]
    fn truncation() {
        let p = ServiceProfile::default().truncated(2).unwrap();
        assert_eq!(p.max_cpus(), 2);
        assert!(p.service_rate(3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delay_monotone(c in 1u32..=5, n in 0u32..4) {
                let p = ServiceProfile::default();
                let d = p.processing_delay(c, n).unwrap();
                if c < 5 {
                    let up = p.processing_delay(c + 1, n).unwrap();
                    prop_assert!(up.as_ms() <= d.as_ms());
                }
                if let (Delay::Finite(a), Delay::Finite(b)) = (d, p.processing_delay(c, n + 1).unwrap()) {
                    prop_assert!(b > a);
                }
            }

            #[test]
            fn overload_iff_load_at_least_one(c in 0u32..=5, n in 1u32..8) {
                let p = ServiceProfile::default();
                let over = p.processing_delay(c, n).unwrap().is_overload();
                let saturated = match p.load(c, n).unwrap() {
                    Load::Overload => true,
                    Load::Finite(l) => l >= 1.0,
                };
                prop_assert_eq!(over, saturated);
            }
        }
    }
}
