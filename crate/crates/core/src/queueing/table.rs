// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ServiceProfile;
use crate::{Error, Result};

pub type VehicleId = u64;

/// Mean delay in milliseconds, or overload when the PoP cannot keep up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Delay {
    Finite(f64),
    Overload,
}

impl Delay {
    pub fn ms(self) -> Option<f64> {
        match self {
            Delay::Finite(d) => Some(d),
            Delay::Overload => None,
        }
    }

    /// Milliseconds, with overload mapped to infinity.
    pub fn as_ms(self) -> f64 {
        self.ms().unwrap_or(f64::INFINITY)
    }

    pub fn is_overload(self) -> bool {
        matches!(self, Delay::Overload)
    }

    pub fn plus(self, ms: f64) -> Delay {
        match self {
            Delay::Finite(d) => Delay::Finite(d + ms),
            Delay::Overload => Delay::Overload,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Load {
    Finite(f64),
    Overload,
}

impl Load {
    pub fn value(self) -> Option<f64> {
        match self {
            Load::Finite(l) => Some(l),
            Load::Overload => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub vehicle: VehicleId,
    pub departure_s: f64,
    pub remote: bool,
}

/// Vehicles and CPUs at one PoP. Load and delay are always derived from
/// the current contents, never cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PopQueue {
    pop_id: usize,
    cpus: u32,
    vehicles: Vec<Assignment>,
}

impl PopQueue {
    pub fn new(pop_id: usize, cpus: u32) -> Self {
        Self { pop_id, cpus, vehicles: Vec::new() }
    }

    pub fn pop_id(&self) -> usize {
        self.pop_id
    }

    pub fn cpus(&self) -> u32 {
        self.cpus
    }

    pub fn vehicles(&self) -> &[Assignment] {
        &self.vehicles
    }

    pub fn n_vehicles(&self) -> u32 {
        self.vehicles.len() as u32
    }

    pub fn n_remote(&self) -> u32 {
        self.vehicles.iter().filter(|v| v.remote).count() as u32
    }

    pub fn set_cpus(&mut self, cpus: u32, profile: &ServiceProfile) -> Result<()> {
        if cpus > profile.max_cpus() {
            return Err(Error::CpuDomain { cpus, max: profile.max_cpus() });
        }
        self.cpus = cpus;
        Ok(())
    }

    /// Applies an increment and clamps the result to `[0, max_cpus]`.
    pub fn scale_by(&mut self, delta: i32, max_cpus: u32) {
        let target = self.cpus as i64 + delta as i64;
        self.cpus = target.clamp(0, max_cpus as i64) as u32;
    }

    pub fn admit(&mut self, vehicle: VehicleId, departure_s: f64, remote: bool) -> Result<()> {
        if self.vehicles.iter().any(|v| v.vehicle == vehicle) {
            return Err(Error::DuplicateVehicle(vehicle));
        }
        self.vehicles.push(Assignment { vehicle, departure_s, remote });
        Ok(())
    }

    /// Drops every vehicle whose departure lies strictly before `now_s`.
    pub fn expire(&mut self, now_s: f64) -> usize {
        let before = self.vehicles.len();
        self.vehicles.retain(|v| v.departure_s >= now_s);
        before - self.vehicles.len()
    }

    pub fn load(&self, profile: &ServiceProfile) -> Load {
        profile.load(self.cpus, self.n_vehicles()).expect("cpus kept within the profile")
    }

    pub fn proc_delay(&self, profile: &ServiceProfile) -> Delay {
        profile.processing_delay(self.cpus, self.n_vehicles()).expect("cpus kept within the profile")
    }
}
