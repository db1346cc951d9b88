// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use v2n_core::agents::{ConstantScaling, GreedyPlacement, LocalPlacement, PiParams, PiScaling, ScalingPolicy, TesConfig, TesScaling};
use v2n_core::ddpg::{DdpgConfig, DdpgScaling};
use v2n_core::env::{run_episode, EnvConfig, EpisodeRecord, NoClock};
use v2n_core::oracle::{solve, OracleInstance, OracleReplay};
use v2n_core::queueing::ServiceProfile;
use v2n_core::traffic::{generate_arrivals, synth_intensity, ArrivalEvent, SynthParams, TrafficTrace};

fn arb_trace(pops: usize, max_len: usize, span_s: f64) -> impl Strategy<Value = TrafficTrace> {
    prop::collection::vec((0.0..span_s, 0..pops), 1..=max_len).prop_map(move |mut ev| {
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        let events = ev.into_iter().map(|(t, pop)| ArrivalEvent { t_us: (t * 1e6) as u64, pop }).collect();
        TrafficTrace::new(pops, events).unwrap()
    })
}

fn policies(pops: usize, max_cpus: u32, seed: u64) -> Vec<Box<dyn ScalingPolicy>> {
    vec![
        Box::new(ConstantScaling::new(vec![max_cpus / 2 + 1; pops])),
        Box::new(PiScaling::new(PiParams::default())),
        Box::new(TesScaling::new(TesConfig::default()).unwrap()),
        Box::new(DdpgScaling::new(DdpgConfig { seed, ..DdpgConfig::default() }, pops, max_cpus).unwrap()),
        Box::new(DdpgScaling::new(DdpgConfig { seed, ..DdpgConfig::global() }, pops, max_cpus).unwrap()),
    ]
}

fn check_record(r: &EpisodeRecord, trace: &TrafficTrace, max_cpus: u32) {
    let pops = trace.pops();
    assert_eq!(r.steps(), trace.len());
    assert_eq!(r.pop_rewards.len(), pops * r.steps());
    assert_eq!(r.cpus.len(), pops * r.steps());
    for i in 0..r.steps() {
        let row = &r.pop_rewards[i * pops..(i + 1) * pops];
        assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!((r.rewards[i] - row.iter().sum::<f64>() / pops as f64).abs() < 1e-12);
        assert!(r.cpus_at(i).iter().all(|&c| c <= max_cpus));
        assert!(r.placements[i] < pops);
        assert_eq!(r.origins[i], trace.events()[i].pop);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn records_are_consistent_and_reproducible(trace in arb_trace(3, 60, 300.0), seed in 0u64..1000) {
        let cfg = EnvConfig::default();
        let max_cpus = cfg.profile.max_cpus();
        for (mut a, mut b) in policies(3, max_cpus, seed).into_iter().zip(policies(3, max_cpus, seed)) {
            let first = run_episode(&trace, &cfg, seed, &mut GreedyPlacement::default(), a.as_mut(), &NoClock).unwrap();
            check_record(&first, &trace, max_cpus);
            let again = run_episode(&trace, &cfg, seed, &mut GreedyPlacement::default(), b.as_mut(), &NoClock).unwrap();
            prop_assert_eq!(first, again);
        }
    }

    #[test]
    fn local_placement_never_moves_vehicles(trace in arb_trace(4, 40, 120.0)) {
        let r = run_episode(&trace, &EnvConfig::default(), 1, &mut LocalPlacement, &mut PiScaling::new(PiParams::default()), &NoClock).unwrap();
        prop_assert_eq!(&r.placements, &r.origins);
    }

    #[test]
    fn oracle_dominates_and_replays(trace in arb_trace(2, 4, 40.0), seed in 0u64..1000) {
        let cfg = EnvConfig { profile: ServiceProfile::default().truncated(2).unwrap(), ..EnvConfig::default() };
        let inst = OracleInstance::new(&trace, trace.len(), cfg.clone(), seed).unwrap();
        let best = solve(&inst, None).unwrap();
        for mut p in policies(2, 2, seed) {
            let total = run_episode(inst.trace(), &cfg, seed, &mut GreedyPlacement::default(), p.as_mut(), &NoClock).unwrap().total_reward();
            prop_assert!(total <= best.total_reward + 1e-9, "{} > {}", total, best.total_reward);
        }
        let mut place = OracleReplay::new(best.clone());
        let mut scale = OracleReplay::new(best.clone());
        let replay = run_episode(inst.trace(), &cfg, seed, &mut place, &mut scale, &NoClock).unwrap();
        prop_assert!((replay.total_reward() - best.total_reward).abs() < 1e-9);
        prop_assert_eq!(replay.placements, best.placements);
    }
}

#[test]
fn synthetic_day_runs_every_agent() {
    let params = SynthParams { pops: 5, days: 1, peak_veh_per_hour: 300.0, trough_veh_per_hour: 30.0, phase_per_pop_h: 0.0, seed: 7 };
    let trace = generate_arrivals(&synth_intensity(&params).unwrap(), 7).window(30_000.0, 33_600.0);
    assert!(trace.len() > 500);
    let cfg = EnvConfig::default();
    for mut p in policies(5, cfg.profile.max_cpus(), 7) {
        let r = run_episode(&trace, &cfg, 7, &mut GreedyPlacement::default(), p.as_mut(), &NoClock).unwrap();
        check_record(&r, &trace, cfg.profile.max_cpus());
        assert!(r.mean_reward() > 0.0);
    }
}
