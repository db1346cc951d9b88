// SPDX-License-Identifier: Apache-2.0

//! Event-driven single-server processor-sharing queue.
//!
//! All tasks in service share the server equally, so every resident task
//! accrues attained service at rate `1/n`. Tracking a global "virtual"
//! attained-service clock lets each task be keyed by the virtual time at
//! which it completes; the smallest key leaves first.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand_distr::{Distribution, Exp};

use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceDiscipline {
    /// Every task needs exactly the mean service time (M/D/1-PS).
    Deterministic,
    /// Exponentially distributed service times (M/M/1-PS).
    Exponential,
}

#[derive(Debug, Clone, Copy)]
struct Resident {
    finish_virtual: f64,
    arrived_at: f64,
    seq: u64,
}

impl PartialEq for Resident {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Resident {}

impl PartialOrd for Resident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Resident {
    fn cmp(&self, other: &Self) -> Ordering {
        self.finish_virtual.total_cmp(&other.finish_virtual).then(self.seq.cmp(&other.seq))
    }
}

/// Simulates `horizon` Poisson arrivals (rate in tasks/ms) through a PS
/// server and returns every task's sojourn time in milliseconds, in
/// departure order.
pub fn simulate_ps_queue(
    discipline: ServiceDiscipline,
    arrival_rate: f64,
    service_time_mean: f64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(arrival_rate.is_finite() && arrival_rate > 0.0) {
        return Err(Error::InvalidArgument("arrival rate must be positive".into()));
    }
    if !(service_time_mean.is_finite() && service_time_mean > 0.0) {
        return Err(Error::InvalidArgument("service time must be positive".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least one task".into()));
    }
    let load = arrival_rate * service_time_mean;
    if load >= 1.0 {
        return Err(Error::Unstable { load });
    }

    let mut arrivals = rng::substream(seed, 0);
    let mut sizes = rng::substream(seed, 1);
    let gap = Exp::new(arrival_rate).expect("positive rate");
    let size = Exp::new(1.0 / service_time_mean).expect("positive rate");

    let mut heap: BinaryHeap<Reverse<Resident>> = BinaryHeap::new();
    let mut sojourns = Vec::with_capacity(horizon);
    let mut now = 0.0_f64;
    let mut virtual_clock = 0.0_f64;
    let mut next_arrival = gap.sample(&mut arrivals);
    let mut issued = 0usize;

    while sojourns.len() < horizon {
        let residents = heap.len() as f64;
        let next_departure = heap.peek().map(|Reverse(r)| now + (r.finish_virtual - virtual_clock) * residents).unwrap_or(f64::INFINITY);

        if issued < horizon && next_arrival <= next_departure {
            if residents > 0.0 {
                virtual_clock += (next_arrival - now) / residents;
            }
            now = next_arrival;
            let work = match discipline {
                ServiceDiscipline::Deterministic => service_time_mean,
                ServiceDiscipline::Exponential => size.sample(&mut sizes),
            };
            heap.push(Reverse(Resident { finish_virtual: virtual_clock + work, arrived_at: now, seq: issued as u64 }));
            issued += 1;
            next_arrival = now + gap.sample(&mut arrivals);
        } else {
            let Reverse(done) = heap.pop().expect("departure implies a resident");
            now = next_departure;
            virtual_clock = done.finish_virtual;
            sojourns.push(now - done.arrived_at);
        }
    }
    Ok(sojourns)
}
