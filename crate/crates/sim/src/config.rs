// SPDX-License-Identifier: Apache-2.0

//! Versioned JSON experiment configuration.
//!
//! Every field has a default, so `{}` is a complete config: the two-day
//! five-PoP synthetic intensity, ten trace replications, a 70/30 split by
//! arrival count and the five agents CNST, PI, TES, DDPG-1 and DDPG-5.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use v2n_core::agents::{GreedyPlacement, PiParams, TesConfig};
use v2n_core::ddpg::DdpgConfig;
use v2n_core::env::EnvConfig;
use v2n_core::oracle::DEFAULT_BUDGET;
use v2n_core::traffic::SynthParams;

use crate::error::{Result, SimError};
use crate::io;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum IntensitySource {
    Synth(SynthParams),
    Csv {
        path: PathBuf,
        /// Inferred from the window starts when absent.
        #[serde(default)]
        window_s: Option<u64>,
    },
}

impl Default for IntensitySource {
    fn default() -> Self {
        IntensitySource::Synth(SynthParams {
            pops: 5,
            days: 2,
            peak_veh_per_hour: 300.0,
            trough_veh_per_hour: 30.0,
            phase_per_pop_h: 0.0,
            seed: 1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSet {
    /// Trace `i` is generated with seed `base_seed + i`; defaults to the
    /// experiment seed.
    pub base_seed: Option<u64>,
    pub count: usize,
}

impl Default for TraceSet {
    fn default() -> Self {
        Self { base_seed: None, count: 10 }
    }
}

/// Half-open time window `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
}

impl Window {
    pub fn overlaps(&self, other: &Window) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Window,
    pub test: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    /// Constant CPU vector; searched on the training window when absent.
    Cnst {
        #[serde(default)]
        cpus: Option<Vec<u32>>,
    },
    Pi {
        #[serde(default)]
        params: PiParams,
    },
    Tes {
        #[serde(default)]
        config: TesConfig,
    },
    Ddpg {
        #[serde(default)]
        config: DdpgConfig,
        #[serde(default = "default_episodes")]
        episodes: usize,
    },
}

fn default_episodes() -> usize {
    100
}

impl AgentKind {
    pub fn label(&self) -> &'static str {
        match self {
            AgentKind::Cnst { .. } => "cnst",
            AgentKind::Pi { .. } => "pi",
            AgentKind::Tes { .. } => "tes",
            AgentKind::Ddpg { .. } => "ddpg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEntry {
    /// Used in output file names: ASCII letters, digits, `-` and `_`.
    pub name: String,
    #[serde(flatten)]
    pub kind: AgentKind,
}

impl AgentEntry {
    pub fn new(name: &str, kind: AgentKind) -> Self {
        Self { name: name.to_string(), kind }
    }
}

pub fn default_agents() -> Vec<AgentEntry> {
    vec![
        AgentEntry::new("cnst", AgentKind::Cnst { cpus: None }),
        AgentEntry::new("pi", AgentKind::Pi { params: PiParams::default() }),
        AgentEntry::new("tes", AgentKind::Tes { config: TesConfig::default() }),
        AgentEntry::new("ddpg1", AgentKind::Ddpg { config: DdpgConfig::default(), episodes: default_episodes() }),
        AgentEntry::new("ddpg5", AgentKind::Ddpg { config: DdpgConfig::global(), episodes: default_episodes() }),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Decisions timed per agent.
    pub states: usize,
    pub pops: usize,
    /// Arrival rate at every PoP of the synthetic bench trace.
    pub veh_per_hour: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { states: 10_000, pops: 5, veh_per_hour: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Instances are cut from the first test traces; defaults to all of them.
    pub instances: Option<usize>,
    /// Arrivals per instance.
    pub arrivals: usize,
    /// Truncates the service profile; defaults to the full profile.
    pub max_cpus: Option<u32>,
    pub budget: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { instances: None, arrivals: 6, max_cpus: None, budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub intensity: IntensitySource,
    /// Replaces `env.profile` (the task rate is kept).
    pub profile_csv: Option<PathBuf>,
    pub env: EnvConfig,
    pub greedy: GreedyPlacement,
    pub traces: TraceSet,
    /// Defaults to 70/30 of trace 0's arrivals.
    pub split: Option<Split>,
    pub agents: Vec<AgentEntry>,
    pub bench: BenchConfig,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 1,
            intensity: IntensitySource::default(),
            profile_csv: None,
            env: EnvConfig::default(),
            greedy: GreedyPlacement::default(),
            traces: TraceSet::default(),
            split: None,
            agents: default_agents(),
            bench: BenchConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl ExperimentConfig {
    /// Reads and validates a config; relative paths are taken from the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let IntensitySource::Csv { path: p, .. } = &mut cfg.intensity {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.profile_csv.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn base_seed(&self) -> u64 {
        self.traces.base_seed.unwrap_or(self.seed)
    }

    pub fn trace_seeds(&self) -> Vec<u64> {
        (0..self.traces.count as u64).map(|i| self.base_seed().wrapping_add(i)).collect()
    }

    pub fn agent(&self, name: &str) -> Option<&AgentEntry> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.traces.count == 0 {
            return bad("traces.count must be at least 1".into());
        }
        if let Some(Split { train, test }) = &self.split {
            for (name, w) in [("train", train), ("test", test)] {
                if !(w.start_s >= 0.0 && w.end_s > w.start_s) {
                    return bad(format!("{name} window must satisfy 0 <= start < end"));
                }
            }
            if train.overlaps(test) {
                return bad("train and test windows overlap".into());
            }
        }
        self.env.validate()?;
        let max_cpus = self.env.profile.max_cpus();
        let mut seen = HashSet::new();
        for a in &self.agents {
            if !valid_name(&a.name) {
                return bad(format!("agent name {:?} must be non-empty [A-Za-z0-9_-]", a.name));
            }
            if !seen.insert(a.name.as_str()) {
                return bad(format!("duplicate agent name {:?}", a.name));
            }
            match &a.kind {
                AgentKind::Cnst { cpus: Some(c) } if c.iter().any(|&c| c > max_cpus) => {
                    return bad(format!("agent {}: cpus exceed max_cpus {max_cpus}", a.name));
                }
                AgentKind::Cnst { .. } => {}
                AgentKind::Pi { params } => params.validate()?,
                AgentKind::Tes { config } => config.validate()?,
                AgentKind::Ddpg { config, episodes } => {
                    config.validate()?;
                    if *episodes == 0 {
                        return bad(format!("agent {}: episodes must be at least 1", a.name));
                    }
                }
            }
        }
        if self.bench.states == 0 || self.bench.pops == 0 || !(self.bench.veh_per_hour > 0.0) {
            return bad("bench needs positive states, pops and rate".into());
        }
        if !(self.oracle.budget > 0.0) {
            return bad("oracle budget must be positive".into());
        }
        Ok(())
    }
}
