// SPDX-License-Identifier: Apache-2.0

//! The `gen-trace`, `train`, `evaluate`, `oracle` and `bench` pipelines.
//!
//! Layout of the output directory:
//!
//! ```text
//! traces/    manifest.json, intensity.csv, trace_<seed>.csv
//! train/     curve_<agent>.csv, <agent>.json (DDPG checkpoints)
//! eval/      report.json, latency.json, cnst_<agent>.json and per agent
//!            vehicles_, steps_, pops_, delay_hist_, cpus_ecdf_<agent>.csv
//! oracle/    oracle.json
//! bench/     bench.json
//! ```
//!
//! `latency.json` and `bench.json` hold wall-clock timings; every other
//! file is a pure function of the config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use v2n_core::agents::{cnst_search, ConstantScaling, GreedyPlacement, PiScaling, ScalingPolicy, TesScaling};
use v2n_core::ddpg::{train_with, DdpgCheckpoint, DdpgScaling};
use v2n_core::env::{run_episode, Clock, EnvConfig, EpisodeRecord};
use v2n_core::oracle::{optimality_gap, solve, OracleInstance, OracleReplay};
use v2n_core::rng::RNG_ALGORITHM;
use v2n_core::traffic::{generate_arrivals, synth_intensity, IntensityEntry, IntensityTable, TrafficTrace};

use crate::config::{AgentEntry, AgentKind, ExperimentConfig, IntensitySource, Split, Window};
use crate::error::{Result, SimError};
use crate::io::{self, csv_writer};
use crate::metrics::{agent_metrics, cpu_ecdf, delay_histogram, LatencyStats, MetricsReport, REPORT_VERSION};

pub const MANIFEST_VERSION: u32 = 1;
/// Share of trace 0's arrivals in the default training window.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
pub const DELAY_BIN_MS: f64 = 1.0;

/// Monotonic wall clock.
pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now_ns(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub seed: u64,
    pub file: String,
    pub arrivals: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub version: u32,
    pub rng: String,
    pub intensity_sha256: String,
    pub pops: usize,
    pub traces: Vec<TraceFile>,
}

/// A validated config bound to an output directory.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub table: IntensityTable,
    pub env: EnvConfig,
}

fn trace_file_name(seed: u64) -> String {
    format!("trace_{seed}.csv")
}

impl Experiment {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let table = match &config.intensity {
            IntensitySource::Synth(p) => synth_intensity(p)?,
            IntensitySource::Csv { path, window_s } => io::read_intensity(path, *window_s)?,
        };
        let mut env = config.env.clone();
        if let Some(path) = &config.profile_csv {
            env.profile = io::read_profile(path, env.profile.task_rate())?;
            env.validate()?;
        }
        Ok(Self { config, out: out.into(), table, env })
    }

    pub fn pops(&self) -> usize {
        self.table.pops()
    }

    pub fn max_cpus(&self) -> u32 {
        self.env.profile.max_cpus()
    }

    /// End of the intensity table.
    pub fn horizon_s(&self) -> f64 {
        let last = self.table.entries().iter().map(|e| e.window_start_s).max().unwrap_or(0);
        (last + self.table.window_seconds()) as f64
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn checkpoint_path(&self, agent: &str) -> PathBuf {
        self.dir("train").join(format!("{agent}.json"))
    }

    /// Trace `seed`, read from `traces/` when `gen-trace` has run, generated
    /// in memory otherwise.
    pub fn trace(&self, seed: u64) -> Result<TrafficTrace> {
        let dir = self.dir("traces");
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Ok(generate_arrivals(&self.table, seed));
        }
        let manifest: TraceManifest = io::read_json(&manifest_path)?;
        if manifest.intensity_sha256 != io::hex(&self.table.digest()) || manifest.pops != self.pops() {
            return Err(SimError::Config(format!(
                "{} was written for a different intensity table; rerun gen-trace",
                manifest_path.display()
            )));
        }
        let Some(entry) = manifest.traces.iter().find(|t| t.seed == seed) else {
            return Err(SimError::Config(format!("{} has no trace for seed {seed}", manifest_path.display())));
        };
        let path = dir.join(&entry.file);
        if io::sha256_file(&path)? != entry.sha256 {
            return Err(SimError::format(&path, "checksum does not match the manifest"));
        }
        io::read_trace(&path, manifest.pops)
    }

    /// The configured split, or 70/30 of trace 0's arrivals.
    pub fn split(&self) -> Result<Split> {
        if let Some(s) = self.config.split {
            return Ok(s);
        }
        let horizon = self.horizon_s();
        let first = self.trace(self.config.base_seed())?;
        let cut = first.quantile_time_s(DEFAULT_TRAIN_FRACTION).unwrap_or(horizon * DEFAULT_TRAIN_FRACTION);
        Ok(Split { train: Window { start_s: 0.0, end_s: cut }, test: Window { start_s: cut, end_s: horizon } })
    }

    pub fn training_trace(&self, split: &Split) -> Result<TrafficTrace> {
        let trace = self.trace(self.config.base_seed())?.window(split.train.start_s, split.train.end_s);
        if trace.is_empty() {
            return Err(SimError::Config("training window holds no arrivals".into()));
        }
        Ok(trace)
    }

    /// `(seed, test-window trace)` for every replication.
    pub fn test_traces(&self, split: &Split) -> Result<Vec<(u64, TrafficTrace)>> {
        self.config.trace_seeds().into_iter().map(|s| Ok((s, self.trace(s)?.window(split.test.start_s, split.test.end_s)))).collect()
    }

    fn load_checkpoint(&self, agent: &str) -> Result<DdpgScaling> {
        let path = self.checkpoint_path(agent);
        if !path.exists() {
            return Err(SimError::MissingCheckpoint { agent: agent.to_string(), path });
        }
        let ckpt: DdpgCheckpoint = io::read_json(&path)?;
        let mut s = DdpgScaling::from_checkpoint(ckpt)?;
        s.set_training(false);
        Ok(s)
    }
}

/// Writes one trace per replication plus `manifest.json`.
pub fn gen_trace(exp: &Experiment) -> Result<TraceManifest> {
    let dir = exp.dir("traces");
    io::create_dir(&dir)?;
    io::write_intensity(&dir.join("intensity.csv"), &exp.table)?;
    let mut traces = Vec::new();
    for seed in exp.config.trace_seeds() {
        let trace = generate_arrivals(&exp.table, seed);
        let file = trace_file_name(seed);
        let path = dir.join(&file);
        io::write_trace(&path, &trace)?;
        traces.push(TraceFile { seed, file, arrivals: trace.len(), sha256: io::sha256_file(&path)? });
    }
    let manifest = TraceManifest {
        version: MANIFEST_VERSION,
        rng: RNG_ALGORITHM.to_string(),
        intensity_sha256: io::hex(&exp.table.digest()),
        pops: exp.pops(),
        traces,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub agent: String,
    pub episodes: usize,
    pub arrivals: usize,
    pub curve: Vec<f64>,
}

/// DDPG networks are seeded with the experiment seed plus the agent's own
/// seed; training dwell times derive from the experiment seed.
fn ddpg_scaler(exp: &Experiment, config: &v2n_core::ddpg::DdpgConfig) -> Result<DdpgScaling> {
    let cfg = v2n_core::ddpg::DdpgConfig { seed: exp.config.seed.wrapping_add(config.seed), ..config.clone() };
    Ok(DdpgScaling::new(cfg, exp.pops(), exp.max_cpus())?)
}

/// Trains every DDPG agent on the training window. `progress(agent,
/// episode, reward)` runs after each episode.
pub fn train(exp: &Experiment, mut progress: impl FnMut(&str, usize, f64)) -> Result<Vec<TrainSummary>> {
    let ddpg: Vec<&AgentEntry> = exp.config.agents.iter().filter(|a| matches!(a.kind, AgentKind::Ddpg { .. })).collect();
    if ddpg.is_empty() {
        return Err(SimError::Config("no DDPG agents to train".into()));
    }
    let split = exp.split()?;
    let trace = exp.training_trace(&split)?;
    let dir = exp.dir("train");
    io::create_dir(&dir)?;
    let mut out = Vec::new();
    for agent in ddpg {
        let AgentKind::Ddpg { config, episodes } = &agent.kind else { unreachable!() };
        let mut scaler = ddpg_scaler(exp, config)?;
        let curve =
            train_with(&mut scaler, &trace, &exp.env, exp.config.greedy, *episodes, exp.config.seed, |e, r| progress(&agent.name, e, r))?;
        let path = dir.join(format!("curve_{}.csv", agent.name));
        let mut w = csv_writer(&path)?;
        w.write_record(["episode", "mean_reward"]).map_err(SimError::csv(&path))?;
        for (e, r) in curve.iter().enumerate() {
            w.write_record([e.to_string(), r.to_string()]).map_err(SimError::csv(&path))?;
        }
        w.flush().map_err(SimError::io(&path))?;
        io::write_json(&exp.checkpoint_path(&agent.name), &scaler.checkpoint())?;
        out.push(TrainSummary { agent: agent.name.clone(), episodes: *episodes, arrivals: trace.len(), curve });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnstChoice {
    pub cpus: Vec<u32>,
    /// Total reward on the training window; absent when configured.
    pub train_total_reward: Option<f64>,
}

/// A ready-to-run scaling policy; `fresh()` gives a copy with no episode state.
#[derive(Debug, Clone)]
enum Policy {
    Cnst(Vec<u32>),
    Pi(v2n_core::agents::PiParams),
    Tes(v2n_core::agents::TesConfig),
    Ddpg(Box<DdpgScaling>),
}

impl Policy {
    fn fresh(&self) -> Result<Box<dyn ScalingPolicy>> {
        Ok(match self {
            Policy::Cnst(c) => Box::new(ConstantScaling::new(c.clone())),
            Policy::Pi(p) => Box::new(PiScaling::new(*p)),
            Policy::Tes(c) => Box::new(TesScaling::new(*c)?),
            Policy::Ddpg(s) => Box::new((**s).clone()),
        })
    }
}

/// Constant vector for `agent`: configured, or searched on `trace`.
fn cnst_vector(exp: &Experiment, cpus: &Option<Vec<u32>>, trace: &TrafficTrace, env: &EnvConfig) -> Result<CnstChoice> {
    let max = env.profile.max_cpus();
    match cpus {
        Some(c) if c.len() == exp.pops() => Ok(CnstChoice { cpus: c.iter().map(|&x| x.min(max)).collect(), train_total_reward: None }),
        Some(c) => Err(SimError::Config(format!("constant vector has {} entries for {} PoPs", c.len(), exp.pops()))),
        None => {
            let found = cnst_search(trace, env, exp.config.greedy, exp.config.seed, None)?;
            Ok(CnstChoice { cpus: found.cpus, train_total_reward: Some(found.total_reward) })
        }
    }
}

fn policy(exp: &Experiment, agent: &AgentEntry, split: &Split, env: &EnvConfig, cnst_dir: Option<&Path>) -> Result<Policy> {
    Ok(match &agent.kind {
        AgentKind::Cnst { cpus } => {
            let choice = cnst_vector(exp, cpus, &exp.training_trace(split)?, env)?;
            if let Some(dir) = cnst_dir {
                io::write_json(&dir.join(format!("cnst_{}.json", agent.name)), &choice)?;
            }
            Policy::Cnst(choice.cpus)
        }
        AgentKind::Pi { params } => Policy::Pi(*params),
        AgentKind::Tes { config } => Policy::Tes(*config),
        AgentKind::Ddpg { .. } => Policy::Ddpg(Box::new(exp.load_checkpoint(&agent.name)?)),
    })
}

fn run(
    exp: &Experiment,
    trace: &TrafficTrace,
    env: &EnvConfig,
    dwell_seed: u64,
    policy: &Policy,
    clock: &dyn Clock,
) -> Result<EpisodeRecord> {
    let mut placement: GreedyPlacement = exp.config.greedy;
    let mut scaling = policy.fresh()?;
    Ok(run_episode(trace, env, dwell_seed, &mut placement, scaling.as_mut(), clock)?)
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(SimError::csv(path))?;
    for row in rows {
        w.write_record(&row).map_err(SimError::csv(path))?;
    }
    w.flush().map_err(SimError::io(path))
}

fn strings<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Raw per-vehicle, per-step and per-PoP dumps plus the delay histogram and
/// total-CPU eCDF of one agent.
fn write_dumps(dir: &Path, name: &str, pops: usize, max_cpus: u32, runs: &[(u64, &TrafficTrace, EpisodeRecord)]) -> Result<()> {
    write_rows(
        &dir.join(format!("vehicles_{name}.csv")),
        &strings(["trace_seed", "step", "t_s", "origin", "placement", "delay_ms"]),
        runs.iter().flat_map(|(seed, trace, r)| {
            (0..r.steps()).map(move |i| {
                vec![
                    seed.to_string(),
                    i.to_string(),
                    io::format_time_us(trace.events()[i].t_us),
                    r.origins[i].to_string(),
                    r.placements[i].to_string(),
                    r.delays[i].as_ms().to_string(),
                ]
            })
        }),
    )?;

    let mut header = strings(["trace_seed", "step", "reward", "total_cpus"]);
    header.extend((0..pops).map(|p| format!("cpus_{p}")));
    header.extend((0..pops).map(|p| format!("reward_{p}")));
    write_rows(
        &dir.join(format!("steps_{name}.csv")),
        &header,
        runs.iter().flat_map(|(seed, _, r)| {
            (0..r.steps()).map(move |i| {
                let cpus = r.cpus_at(i);
                let mut row = vec![seed.to_string(), i.to_string(), r.rewards[i].to_string(), cpus.iter().sum::<u32>().to_string()];
                row.extend(cpus.iter().map(u32::to_string));
                row.extend(r.pop_rewards[i * pops..(i + 1) * pops].iter().map(f64::to_string));
                row
            })
        }),
    )?;

    let (bins, overload) = delay_histogram(runs.iter().map(|(_, _, r)| r), DELAY_BIN_MS);
    let mut rows: Vec<Vec<String>> = bins
        .iter()
        .enumerate()
        .map(|(k, c)| vec![(k as f64 * DELAY_BIN_MS).to_string(), ((k + 1) as f64 * DELAY_BIN_MS).to_string(), c.to_string()])
        .collect();
    rows.push(vec!["inf".into(), "inf".into(), overload.to_string()]);
    write_rows(&dir.join(format!("delay_hist_{name}.csv")), &strings(["bin_start_ms", "bin_end_ms", "count"]), rows)?;

    let ecdf = cpu_ecdf(runs.iter().map(|(_, _, r)| r), max_cpus * pops as u32);
    write_rows(
        &dir.join(format!("cpus_ecdf_{name}.csv")),
        &strings(["total_cpus", "fraction"]),
        ecdf.iter().enumerate().map(|(c, f)| vec![c.to_string(), f.to_string()]),
    )
}

fn write_pop_breakdown(dir: &Path, m: &crate::metrics::AgentMetrics) -> Result<()> {
    write_rows(
        &dir.join(format!("pops_{}.csv", m.name)),
        &strings(["pop", "mean_reward", "mean_cpus", "vehicles_placed"]),
        m.per_pop
            .iter()
            .map(|p| vec![p.pop.to_string(), p.mean_reward.to_string(), p.mean_cpus.to_string(), p.vehicles_placed.to_string()]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyEntry {
    pub name: String,
    pub latency_us: LatencyStats,
}

/// Runs every agent over every test trace with exploration off. Returns
/// the report with latencies filled in; `report.json` omits them.
pub fn evaluate(exp: &Experiment) -> Result<MetricsReport> {
    let split = exp.split()?;
    let tests = exp.test_traces(&split)?;
    let dir = exp.dir("eval");
    io::create_dir(&dir)?;
    let clock = StdClock::new();
    let mut agents = Vec::new();
    for agent in &exp.config.agents {
        let policy = policy(exp, agent, &split, &exp.env, Some(&dir))?;
        let runs = tests
            .iter()
            .map(|(seed, trace)| Ok((*seed, trace, run(exp, trace, &exp.env, *seed, &policy, &clock)?)))
            .collect::<Result<Vec<_>>>()?;
        write_dumps(&dir, &agent.name, exp.pops(), exp.max_cpus(), &runs)?;
        let records: Vec<(u64, EpisodeRecord)> = runs.into_iter().map(|(s, _, r)| (s, r)).collect();
        let m = agent_metrics(&agent.name, agent.kind.label(), &records, exp.env.reward.d_tgt_ms);
        write_pop_breakdown(&dir, &m)?;
        agents.push(m);
    }
    let report = MetricsReport {
        version: REPORT_VERSION,
        seed: exp.config.seed,
        test_window: split.test,
        d_tgt_ms: exp.env.reward.d_tgt_ms,
        agents,
    };
    let latency: Vec<LatencyEntry> =
        report.agents.iter().filter_map(|a| a.latency_us.map(|l| LatencyEntry { name: a.name.clone(), latency_us: l })).collect();
    io::write_json(&dir.join("latency.json"), &latency)?;
    let mut stripped = report.clone();
    stripped.agents.iter_mut().for_each(|a| a.latency_us = None);
    io::write_json(&dir.join("report.json"), &stripped)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGap {
    pub name: String,
    pub total_reward: f64,
    /// Absent when the optimum is not positive.
    pub gap_pct: Option<f64>,
    pub avg_cpus: f64,
    pub violation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub trace_seed: u64,
    pub digest: String,
    pub arrivals: usize,
    pub optimal_total: f64,
    pub agents: Vec<AgentGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub name: String,
    /// Mean over instances with a defined gap.
    pub mean_gap_pct: Option<f64>,
    pub mean_avg_cpus: f64,
    pub mean_violation_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub version: u32,
    pub arrivals: usize,
    pub max_cpus: u32,
    pub instances: Vec<InstanceReport>,
    pub summary: Vec<GapSummary>,
}

/// SHA-256 over arrival times, origins, pre-drawn departures, the CPU cap
/// and the environment config.
pub fn instance_digest(inst: &OracleInstance) -> String {
    let mut bytes = Vec::new();
    for (e, d) in inst.trace().events().iter().zip(inst.departures()) {
        bytes.extend_from_slice(&e.t_us.to_le_bytes());
        bytes.extend_from_slice(&(e.pop as u64).to_le_bytes());
        bytes.extend_from_slice(&d.to_bits().to_le_bytes());
    }
    bytes.extend_from_slice(&(inst.pops() as u64).to_le_bytes());
    bytes.extend_from_slice(&inst.max_cpus().to_le_bytes());
    bytes.extend_from_slice(serde_json::to_string(inst.config()).expect("config serializes").as_bytes());
    io::sha256_hex(&bytes)
}

fn gap_row(name: &str, r: &EpisodeRecord, optimal: f64, d_tgt_ms: f64) -> Result<AgentGap> {
    let total = r.total_reward();
    Ok(AgentGap {
        name: name.to_string(),
        total_reward: total,
        gap_pct: if optimal > 0.0 { Some(optimality_gap(total, optimal)?) } else { None },
        avg_cpus: r.mean_total_cpus(),
        violation_pct: 100.0 * r.violation_fraction(d_tgt_ms),
    })
}

/// Solves the first `oracle.arrivals` arrivals of each test trace exactly
/// and scores every agent (and a replay of the optimum) against it.
pub fn oracle(exp: &Experiment) -> Result<OracleReport> {
    let ocfg = &exp.config.oracle;
    let mut env = exp.env.clone();
    if let Some(m) = ocfg.max_cpus {
        env.profile = env.profile.truncated(m)?;
        env.initial_cpus = env.initial_cpus.min(m);
    }
    let split = exp.split()?;
    let mut tests = exp.test_traces(&split)?;
    tests.truncate(ocfg.instances.unwrap_or(tests.len()));
    let policies =
        exp.config.agents.iter().map(|a| Ok((a.name.as_str(), policy(exp, a, &split, &env, None)?))).collect::<Result<Vec<_>>>()?;
    let d_tgt = env.reward.d_tgt_ms;

    let mut instances = Vec::new();
    for (seed, trace) in &tests {
        let inst = OracleInstance::new(trace, ocfg.arrivals, env.clone(), *seed)?;
        let sol = solve(&inst, Some(ocfg.budget))?;
        let optimal = sol.total_reward;
        let mut rows = Vec::new();
        let mut replay = OracleReplay::new(sol);
        let r = run_episode(inst.trace(), &env, *seed, &mut replay.clone(), &mut replay, &v2n_core::env::NoClock)?;
        rows.push(gap_row("oracle", &r, optimal, d_tgt)?);
        for (name, p) in &policies {
            let r = run(exp, inst.trace(), &env, *seed, p, &v2n_core::env::NoClock)?;
            rows.push(gap_row(name, &r, optimal, d_tgt)?);
        }
        instances.push(InstanceReport {
            trace_seed: *seed,
            digest: instance_digest(&inst),
            arrivals: inst.arrivals(),
            optimal_total: optimal,
            agents: rows,
        });
    }

    let names: Vec<String> = instances.first().map(|i| i.agents.iter().map(|a| a.name.clone()).collect()).unwrap_or_default();
    let summary = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let rows: Vec<&AgentGap> = instances.iter().map(|i| &i.agents[k]).collect();
            let n = rows.len().max(1) as f64;
            let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap_pct).collect();
            GapSummary {
                name: name.clone(),
                mean_gap_pct: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                mean_avg_cpus: rows.iter().map(|r| r.avg_cpus).sum::<f64>() / n,
                mean_violation_pct: rows.iter().map(|r| r.violation_pct).sum::<f64>() / n,
            }
        })
        .collect();
    let report = OracleReport { version: REPORT_VERSION, arrivals: ocfg.arrivals, max_cpus: env.profile.max_cpus(), instances, summary };
    let dir = exp.dir("oracle");
    io::create_dir(&dir)?;
    io::write_json(&dir.join("oracle.json"), &report)?;
    Ok(report)
}

/// Constant-rate trace with at least `states` arrivals over `pops` PoPs.
pub fn bench_trace(states: usize, pops: usize, veh_per_hour: f64, seed: u64) -> Result<TrafficTrace> {
    let mut window_s = (1.5 * states as f64 * 3600.0 / (pops as f64 * veh_per_hour)).ceil().max(1.0) as u64;
    loop {
        let entries: Vec<IntensityEntry> = (0..pops).map(|pop| IntensityEntry { window_start_s: 0, pop, veh_per_hour }).collect();
        let trace = generate_arrivals(&IntensityTable::from_entries(window_s, &entries)?, seed);
        if trace.len() >= states {
            return Ok(trace.prefix(states));
        }
        window_s *= 2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub name: String,
    pub kind: String,
    pub latency_us: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub states: usize,
    pub pops: usize,
    pub agents: Vec<BenchEntry>,
}

/// Decisions untimed before measuring.
const BENCH_WARMUP: usize = 500;

/// Per-decision (placement plus scaling) wall time of every agent. DDPG
/// agents use their checkpoint when it matches the bench shape and freshly
/// initialized networks otherwise; inference cost is the same.
pub fn bench(exp: &Experiment) -> Result<BenchReport> {
    let b = &exp.config.bench;
    let trace = bench_trace(b.states, b.pops, b.veh_per_hour, exp.config.seed)?;
    let max = exp.max_cpus();
    let mut agents = Vec::new();
    for agent in &exp.config.agents {
        let policy = match &agent.kind {
            AgentKind::Cnst { cpus } => {
                Policy::Cnst(cpus.clone().filter(|c| c.len() == b.pops).unwrap_or_else(|| vec![max.div_ceil(2); b.pops]))
            }
            AgentKind::Pi { params } => Policy::Pi(*params),
            AgentKind::Tes { config } => Policy::Tes(*config),
            AgentKind::Ddpg { config, .. } => {
                let loaded = exp.load_checkpoint(&agent.name).ok().filter(|s| s.pops() == b.pops);
                let s = match loaded {
                    Some(s) => s,
                    None => DdpgScaling::new(config.clone(), b.pops, max)?,
                };
                Policy::Ddpg(Box::new(s))
            }
        };
        let clock = StdClock::new();
        run(exp, &trace.prefix(BENCH_WARMUP), &exp.env, exp.config.seed, &policy, &clock)?;
        let r = run(exp, &trace, &exp.env, exp.config.seed, &policy, &clock)?;
        agents.push(BenchEntry {
            name: agent.name.clone(),
            kind: agent.kind.label().to_string(),
            latency_us: LatencyStats::from_ns(&r.latency_ns),
        });
    }
    let report = BenchReport { states: b.states, pops: b.pops, agents };
    let dir = exp.dir("bench");
    io::create_dir(&dir)?;
    io::write_json(&dir.join("bench.json"), &report)?;
    Ok(report)
}
