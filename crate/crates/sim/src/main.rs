// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use v2n_sim::commands;
use v2n_sim::{Experiment, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "v2n-sim", version, about = "Placement and CPU scaling experiments for C-V2N edge PoPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replaces the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write one arrival trace per replication and a manifest.
    GenTrace,
    /// Train the DDPG agents on the training window.
    Train,
    /// Run every agent on every test trace and write metrics.
    Evaluate,
    /// Exact optimum on short trace prefixes and per-agent gaps.
    Oracle,
    /// Per-decision latency of every agent.
    Bench,
    /// Print the effective config.
    ShowConfig,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&config).expect("config serializes"));
        return Ok(());
    }
    let exp = Experiment::new(config, cli.out)?;
    match cli.command {
        Command::GenTrace => {
            let m = commands::gen_trace(&exp)?;
            for t in &m.traces {
                println!("{}: {} arrivals", t.file, t.arrivals);
            }
        }
        Command::Train => {
            let summaries = commands::train(&exp, |agent, e, r| println!("{agent} episode {e}: mean reward {r:.4}"))?;
            for s in &summaries {
                println!("{}: {} episodes on {} arrivals", s.agent, s.episodes, s.arrivals);
            }
        }
        Command::Evaluate => {
            let report = commands::evaluate(&exp)?;
            println!("{:<10} {:>8} {:>8} {:>8} {:>9} {:>10}", "agent", "reward", "std", "cpus", "violation", "mean us");
            for a in &report.agents {
                let us = a.latency_us.map_or(0.0, |l| l.mean_us);
                println!(
                    "{:<10} {:>8.4} {:>8.4} {:>8.3} {:>9.4} {:>10.2}",
                    a.name, a.mean_reward, a.std_reward, a.mean_active_cpus, a.violation_fraction, us
                );
            }
        }
        Command::Oracle => {
            let report = commands::oracle(&exp)?;
            for s in &report.summary {
                let gap = s.mean_gap_pct.map_or_else(|| "n/a".to_string(), |g| format!("{g:.1}%"));
                println!("{:<10} gap {gap:>7}  cpus {:.2}  violations {:.1}%", s.name, s.mean_avg_cpus, s.mean_violation_pct);
            }
        }
        Command::Bench => {
            let report = commands::bench(&exp)?;
            for a in &report.agents {
                println!("{:<10} mean {:>9.2} us  p99 {:>9.2} us", a.name, a.latency_us.mean_us, a.latency_us.p99_us);
            }
        }
        Command::ShowConfig => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
