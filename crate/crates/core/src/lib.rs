// SPDX-License-Identifier: Apache-2.0

//! Placement and CPU scaling for vehicle-to-network (V2N) video analytics
//! served from edge Points of Presence (PoPs).
//!
//! Each PoP is an M/G/1 processor-sharing server whose rate grows with the
//! number of active CPUs. Vehicles arrive according to a piecewise Poisson
//! trace, get placed on a PoP by a greedy rule and stay for an exponential
//! dwell time. Scaling controllers (constant, PI, Holt-Winters, DDPG) adjust
//! the CPU count of every PoP on each arrival and are scored with a reward
//! that peaks when the experienced delay equals the target.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! timing live in the `v2n-sim` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod ddpg;
pub mod env;
mod error;
pub(crate) mod math;
pub mod oracle;
pub mod queueing;
pub mod rng;
pub mod traffic;

pub use error::{Error, Result};
