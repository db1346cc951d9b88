// SPDX-License-Identifier: Apache-2.0

use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cpu count {cpus} outside 0..={max}")]
    CpuDomain { cpus: u32, max: u32 },
    #[error("invalid service profile: {0}")]
    Profile(String),
    #[error("vehicle {0} already assigned to this PoP")]
    DuplicateVehicle(u64),
    #[error("unstable queue: load {load:.4} >= 1")]
    Unstable { load: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid intensity table: {0}")]
    Intensity(String),
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("trace has no arrivals")]
    EmptyTrace,
    #[error("placement {placement} outside 0..{pops}")]
    InvalidPlacement { placement: usize, pops: usize },
    #[error("action carries {got} deltas, environment has {pops} PoPs")]
    ActionShape { got: usize, pops: usize },
    #[error("step called without a pending arrival")]
    NoPendingArrival,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("training diverged at episode {episode}, step {step}: loss {loss}")]
    Divergence { episode: usize, step: usize, loss: f64 },
    #[error("search space of {required} exceeds budget {budget}")]
    Budget { required: f64, budget: f64 },
    #[error("out-of-order timestamp {now} < {last}")]
    OutOfOrder { now: f64, last: f64 },
    #[error("agent failed at step {step}: {source}")]
    Agent { step: usize, source: Box<Error> },
}
