use std::collections::{BTreeMap, BTreeSet};

use aidedex::engine::{Fault, FaultSchedule, RunOptions, Simulation, StepOutcome};
use aidedex::fusion::{priority_score, Candidate, CandidateStatus, FusionModels, PriorityWeights, ThreatHeatmap};
use aidedex::mission::MissionPhase;
use aidedex::netsim::{NetConfig, Network, Topology};
use aidedex::sensors::{DetectionModel, ReadingId, SensorKind, SensorReading};
use aidedex::world::{generate_scenario, Cell, ControllerMode, ScenarioParams, Terrain, TerrainPriors};
use proptest::prelude::*;

fn reading(seq: u32, kind: SensorKind, cells: Vec<usize>, det: Vec<bool>) -> SensorReading {
    let features = det.iter().map(|d| d.then_some([0.0; 4])).collect();
    SensorReading { id: ReadingId { robot: 2, seq }, robot_id: 2, kind, tick: seq as u64, cells, detections: det, features, true_pose_error: 0.0 }
}

fn models() -> FusionModels {
    FusionModels::from_models(
        [
            DetectionModel { kind: SensorKind::Gpr, p_det_eff: 0.7, p_fp: 0.05 },
            DetectionModel { kind: SensorKind::Emi, p_det_eff: 0.9, p_fp: 0.1 },
        ],
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fusion_ignores_reading_order(
        raw in prop::collection::vec((any::<bool>(), prop::collection::vec((0usize..25, any::<bool>()), 1..8)), 0..30),
        shuffle_seed in any::<u64>(),
    ) {
        let readings: Vec<SensorReading> = raw
            .iter()
            .enumerate()
            .map(|(i, (gpr, cells))| {
                let kind = if *gpr { SensorKind::Gpr } else { SensorKind::Emi };
                reading(i as u32, kind, cells.iter().map(|c| c.0).collect(), cells.iter().map(|c| c.1).collect())
            })
            .collect();
        let mut shuffled = readings.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        let m = models();
        let mut a = ThreatHeatmap::new(5, 5, vec![0.02; 25]);
        let mut b = a.clone();
        for r in &readings { a.integrate_reading(r, &m).unwrap(); }
        for r in &shuffled { b.integrate_reading(r, &m).unwrap(); }
        prop_assert_eq!(a.deltas(), b.deltas());
        prop_assert_eq!(a.posteriors(), b.posteriors());
    }

    #[test]
    fn scaling_priority_weights_keeps_the_order(
        items in prop::collection::vec((0.0f64..1.0, 0u32..20, 0.0f64..0.05), 2..12),
        scale in 0.01f64..100.0,
    ) {
        let w = PriorityWeights::default();
        let ws = PriorityWeights { vision: w.vision * scale, terrain: w.terrain * scale, posterior: w.posterior * scale };
        let order = |w: &PriorityWeights| {
            let mut v: Vec<(usize, f64)> = items
                .iter()
                .enumerate()
                .map(|(i, (post, hits, prior))| {
                    let c = Candidate { id: i as u32, cell: i, posterior: *post, class_logp: [0.0; 3], status: CandidateStatus::Suspected, contact_evidence: false };
                    let cell = Cell::new(Terrain::Sand, false, false, &TerrainPriors { sand: *prior, ..Default::default() });
                    (i, priority_score(&c, &cell, *hits, w))
                })
                .collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v.into_iter().map(|x| x.0).collect::<Vec<_>>()
        };
        prop_assert_eq!(order(&w), order(&ws));
    }

    #[test]
    fn identical_seeds_identical_traces(seed in any::<u64>(), loss in 0.0f64..0.5, sends in prop::collection::vec((0u32..6, 0u32..6, 0u64..20), 1..40)) {
        let trace = || {
            let mut n: Network<&'static str> = Network::new(NetConfig { p_link_loss: loss, ..NetConfig::default() }, seed);
            n.enable_trace();
            n.set_topology(Topology::from_edges(0..6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]));
            for (s, d, t) in &sends {
                n.send(*s, *d, "p", *t);
            }
            n.broadcast(0, "b", 0);
            for t in 0..60 {
                n.deliver(t);
            }
            n.take_trace()
        };
        prop_assert_eq!(trace(), trace());
    }
}

/// Steps a run to the end, checking per-tick invariants along the way.
fn checked_run(seed: u64, mode: ControllerMode, faults: FaultSchedule) -> (String, MissionPhase) {
    let params = ScenarioParams { controller_mode: mode, ..ScenarioParams::sized(30, 30, 6) };
    let s = generate_scenario(&params, seed).unwrap();
    let dt = s.mission_config.dt;
    let [dx, dy] = s.fleet_config.deploy_cell;
    let deploy = s.grid.index_of(dx as i64, dy as i64).unwrap();
    let mut sim = Simulation::new(s.clone(), RunOptions { faults, max_ticks: 4000, ..Default::default() }).unwrap();
    let mut prev: BTreeMap<u32, (f64, f64, f64, usize, usize)> = BTreeMap::new();
    let mut failed_at: BTreeMap<u32, usize> = BTreeMap::new();
    while sim.step() == StepOutcome::Advanced {
        let t = sim.tick();
        // one brain per component, the lowest id in MNS and the centre otherwise
        let snap = sim.snapshot();
        for comp in &snap.partitions {
            let brains: BTreeSet<_> = comp.iter().map(|n| sim.brains()[n]).collect();
            assert_eq!(brains.len(), 1, "tick {t}: component {comp:?} has brains {brains:?}");
            let b = *brains.iter().next().unwrap();
            match mode {
                ControllerMode::Mns => assert_eq!(b, comp[0]),
                ControllerMode::Centralized => assert_eq!(b, 0),
            }
        }
        // no task held by two robots at once
        let mut held = BTreeMap::new();
        for r in sim.fleet().alive() {
            if let Some(task) = sim.agent(r.id).unwrap().current_task() {
                if let Some(other) = held.insert(task, r.id) {
                    panic!("tick {t}: {task} held by robots {other} and {}", r.id);
                }
            }
        }
        for r in &sim.fleet().robots {
            for k in SensorKind::ALL {
                assert_eq!(r.has_sensor(k), r.kind.loadout().contains(&k));
            }
            let taken = sim.agent(r.id).unwrap().readings_taken();
            let cell = r.cell(&s.grid);
            let here = (r.pose.x, r.pose.y, r.battery_s, taken, cell);
            if let Some(&(px, py, pb, pt, pc)) = prev.get(&r.id) {
                let moved = (r.pose.x - px).hypot(r.pose.y - py);
                assert!(moved <= r.speed * dt + 1e-9, "robot {} moved {moved}", r.id);
                // charging happens before motion, so base at either end counts
                if pc != deploy && cell != deploy {
                    assert!(r.battery_s <= pb, "robot {} gained charge away from base", r.id);
                }
                if !r.is_alive() {
                    let at = *failed_at.entry(r.id).or_insert(pt);
                    assert_eq!(taken, at, "failed robot {} kept scanning", r.id);
                    assert_eq!((r.pose.x, r.pose.y), (px, py));
                    assert!(!sim.network().topology().contains(r.id));
                }
            }
            prev.insert(r.id, here);
        }
    }
    // every reading integrated at most once
    for node in sim.brains().values().collect::<BTreeSet<_>>() {
        let c = sim.coordinator(*node).unwrap();
        let ids: Vec<_> = c.integrated().collect();
        let unique: BTreeSet<_> = ids.iter().collect();
        assert_eq!(ids.len(), unique.len());
        assert_eq!(ids.len(), c.reading_count());
    }
    let m = sim.metrics();
    (m.outcome, m.phase_reached)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Losing robots never stops the mission while each task kind keeps an eligible robot.
    #[test]
    fn survivable_failures_still_complete(
        seed in 0u64..10_000,
        mns in any::<bool>(),
        suav in prop::option::of(1u32..=2),
        sugvs in prop::collection::btree_set(4u32..=5, 0..=2),
        ticks in prop::collection::vec(1u64..600, 3),
        blackout in prop::option::of((50u64..400, 20u64..200)),
    ) {
        let mode = if mns { ControllerMode::Mns } else { ControllerMode::Centralized };
        let mut f = FaultSchedule::default();
        for (i, robot) in suav.into_iter().chain(sugvs).enumerate() {
            f = f.push(Fault::RobotFailure { robot: robot.to_string(), tick: ticks[i] });
        }
        if let Some((start, len)) = blackout {
            // temporary: the graph reconnects afterwards
            f = f.push(Fault::CommsBlackout { start, end: Some(start + len), nodes: vec!["centre".into()], region: None, links: vec![] });
        }
        let (outcome, phase) = checked_run(seed, mode, f);
        prop_assert_eq!(outcome, "complete");
        prop_assert_eq!(phase, MissionPhase::Complete);
    }
}

#[test]
fn invariants_hold_through_a_partitioned_run() {
    let f = FaultSchedule::default()
        .push(Fault::CommsBlackout { start: 40, end: Some(400), nodes: vec![], region: Some([0.0, 0.0, 15.0, 30.0]), links: vec![] })
        .push(Fault::RobotFailure { robot: "SUGV-2".into(), tick: 150 });
    let (outcome, _) = checked_run(3, ControllerMode::Mns, f);
    assert_eq!(outcome, "complete");
}
