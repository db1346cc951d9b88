// SPDX-License-Identifier: Apache-2.0

//! File formats, experiment configuration and the pipelines behind the
//! `v2n-sim` command line: trace generation, DDPG training, evaluation
//! with metric dumps, exact small-scale optimality gaps and decision
//! latency benchmarks.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;

pub use commands::Experiment;
pub use config::ExperimentConfig;
pub use error::{Result, SimError};
