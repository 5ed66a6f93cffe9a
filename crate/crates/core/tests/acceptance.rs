//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single `PASS`/`FAIL` line, bypassing the test harness's
//! output capture so the lines always reach the terminal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::time::{Duration, Instant};

use aidedex::cli::{compare_reports, load_report, main_with};
use aidedex::engine::{run, Fault, FaultSchedule, LogRecord, RecordBody, RunOptions, RunResult};
use aidedex::fleet::{plan_path, RobotKind};
use aidedex::fusion::oracle::posterior_brute_force_oracle;
use aidedex::fusion::{calibration_harness, CalibrationConfig, FusionModels, ThreatHeatmap};
use aidedex::mission::{match_candidates, MissionPhase};
use aidedex::netsim::{NetConfig, Network, NodeId, Topology};
use aidedex::sensors::{scan, DetectionModel, LocalizationNoise, ReadingId, ScanTarget, SensorKind, SensorReading, SensorTable};
use aidedex::world::{generate_scenario, traversable, ControllerMode, Scenario, ScenarioParams, Terrain, ThreatId, ThreatProfiles, WorldGrid};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, ok: bool, detail: String, took: Duration) {
    let line = format!("{} {name}: {detail} ({:.2}s)\n", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{name}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scenario(seed: u64, mode: ControllerMode) -> Scenario {
    let p = ScenarioParams { controller_mode: mode, ..Default::default() };
    generate_scenario(&p, seed).expect("default params generate")
}

fn with_faults(faults: FaultSchedule) -> RunOptions {
    RunOptions { faults, ..Default::default() }
}

// ---------------------------------------------------------------- fusion

fn random_reading(rng: &mut ChaCha8Rng, seq: u32, cells: usize, kinds: &[SensorKind]) -> SensorReading {
    let mut covered: Vec<usize> = (0..cells).filter(|_| rng.gen_bool(0.3)).collect();
    if covered.is_empty() {
        covered.push(rng.gen_range(0..cells));
    }
    let detections: Vec<bool> = covered.iter().map(|_| rng.gen_bool(0.4)).collect();
    let features = detections.iter().map(|d| d.then_some([0.0; 4])).collect();
    SensorReading {
        id: ReadingId { robot: 1, seq },
        robot_id: 1,
        kind: *kinds.choose(rng).unwrap(),
        tick: seq as u64,
        cells: covered,
        detections,
        features,
        true_pose_error: 0.0,
    }
}

#[test]
fn fusion_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(11);
    let kinds = [SensorKind::Rgb, SensorKind::Gpr, SensorKind::Emi];
    let (cases, mut worst) = (250, 0.0f64);
    for _ in 0..cases {
        let (w, h) = (r.gen_range(1..=10u32), r.gen_range(1..=10u32));
        let n = (w * h) as usize;
        let priors: Vec<f64> = (0..n).map(|_| r.gen_range(0.001..0.6)).collect();
        let models: Vec<DetectionModel> = kinds
            .iter()
            .map(|&kind| DetectionModel { kind, p_det_eff: r.gen_range(0.05..0.99), p_fp: r.gen_range(0.005..0.4) })
            .collect();
        let readings: Vec<SensorReading> = (0..r.gen_range(0..=50)).map(|s| random_reading(&mut r, s, n, &kinds)).collect();
        let fm = FusionModels::from_models(models.clone(), None).unwrap();
        let mut heat = ThreatHeatmap::new(w, h, priors.clone());
        for rd in &readings {
            heat.integrate_reading(rd, &fm).unwrap();
        }
        let oracle = posterior_brute_force_oracle(&readings, &priors, &models);
        for (c, o) in oracle.iter().enumerate() {
            worst = worst.max((heat.posterior(c) - o).abs());
        }
    }
    let took = start.elapsed();
    let ok = worst <= 1e-9 && took < Duration::from_secs(10);
    report("fusion oracle equivalence", ok, format!("{cases} instances, max |diff| {worst:.3e}"), took);
}

// ---------------------------------------------------------------- engine

#[test]
fn determinism() {
    let start = Instant::now();
    let s = scenario(2024, ControllerMode::Mns);
    let hashes: BTreeSet<String> = (0..20)
        .map(|_| run(&s, RunOptions { max_ticks: 5000, ..Default::default() }).unwrap().log.hash())
        .collect();
    let took = start.elapsed();
    let ok = hashes.len() == 1 && took < Duration::from_secs(60);
    report("determinism", ok, format!("20 runs of 50x50, 6 robots, 5000 ticks -> {} unique log hash(es)", hashes.len()), took);
}

fn assignments(records: &[LogRecord]) -> Vec<(u64, String, u32)> {
    records
        .iter()
        .filter_map(|r| match &r.body {
            RecordBody::Assign { task, robot } => Some((r.tick, task.to_string(), *robot)),
            _ => None,
        })
        .collect()
}

#[test]
fn centralized_equals_mns_under_perfect_comms() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 1..=10 {
        let mut runs = Vec::new();
        for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
            let mut s = scenario(seed, mode);
            s.net_config.p_link_loss = 0.0;
            s.net_config.radio_range = 1e6;
            runs.push(run(&s, RunOptions::default()).unwrap());
        }
        let (c, m) = (&runs[0], &runs[1]);
        let (ac, am) = (assignments(&c.log.records), assignments(&m.log.records));
        if ac.is_empty() || ac != am || c.heatmap != m.heatmap {
            failures.push(seed);
        }
    }
    report(
        "centralized == MNS under perfect comms",
        failures.is_empty(),
        format!("10 scenarios, assignment sequence and heatmap mismatches on seeds {failures:?}"),
        start.elapsed(),
    );
}

fn fail_at(robot: &str, tick: u64) -> FaultSchedule {
    FaultSchedule::default().push(Fault::RobotFailure { robot: robot.into(), tick })
}

#[test]
fn robustness_to_losing_a_sugv() {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut worst_cov = 1.0f64;
    for seed in 1..=20 {
        for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
            let s = scenario(100 + seed, mode);
            let base = run(&s, RunOptions::default()).unwrap();
            // mission time is the fault-free completion tick
            let t = base.metrics.phase_ticks.complete.unwrap_or(base.metrics.ticks);
            let victim = if seed % 2 == 0 { "SUGV-1" } else { "SUGV-2" };
            let r = run(&s, with_faults(fail_at(victim, t / 4))).unwrap();
            worst_cov = worst_cov.min(r.metrics.coverage);
            if r.metrics.outcome != "complete" || r.metrics.coverage < 0.9 || r.metrics.robots_failed != 1 {
                bad.push((seed, mode, r.metrics.outcome.clone(), r.metrics.coverage));
            }
        }
    }
    report(
        "robustness (one SUGV killed at 25% mission time)",
        bad.is_empty(),
        format!("20 scenarios x both modes, min coverage {worst_cov:.4}, failing {bad:?}"),
        start.elapsed(),
    );
}

fn blackout() -> FaultSchedule {
    FaultSchedule::default().push(Fault::CommsBlackout { start: 100, end: None, nodes: vec!["centre".into()], region: None, links: vec![] })
}

fn write_metrics(dir: &std::path::Path, r: &RunResult) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&r.metrics).unwrap()).unwrap();
}

#[test]
fn decentralized_survives_centre_loss() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=10u64 {
        let c = run(&scenario(seed, ControllerMode::Centralized), with_faults(blackout())).unwrap();
        let m = run(&scenario(seed, ControllerMode::Mns), with_faults(blackout())).unwrap();
        let (dc, dm) = (tmp.path().join(format!("c{seed}")), tmp.path().join(format!("m{seed}")));
        write_metrics(&dc, &c);
        write_metrics(&dm, &m);
        let cmp = compare_reports(&load_report(&dc).unwrap(), &load_report(&dm).unwrap()).unwrap();
        let exit = main_with(["aidedex", "compare", dc.to_str().unwrap(), dm.to_str().unwrap()].map(std::ffi::OsString::from));
        let stalled = c.metrics.phase_reached < MissionPhase::Confirmation && c.metrics.outcome != "complete";
        let up = |name: &str| cmp.row(name).and_then(|r| r.sign()) == Some(1);
        let good = exit == 0 && m.metrics.outcome == "complete" && stalled && up("complete") && up("phase_reached");
        ok &= good;
        lines.push(format!("seed {seed}: centralized {} at {:?}, mns {}", c.metrics.outcome, c.metrics.phase_reached, m.metrics.outcome));
    }
    report("decentralized survives centre blackout", ok, format!("10 scenarios: {}", lines.join("; ")), start.elapsed());
}

// ---------------------------------------------------------------- network

/// Random connected graph: a random spanning tree plus extra edges.
fn connected_graph(r: &mut ChaCha8Rng, n: u32, extra: usize) -> Vec<(NodeId, NodeId)> {
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(r);
    let mut edges = BTreeSet::new();
    for i in 1..order.len() {
        let j = r.gen_range(0..i);
        let (a, b) = (order[i], order[j]);
        edges.insert((a.min(b), a.max(b)));
    }
    for _ in 0..extra {
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    edges.into_iter().collect()
}

fn bfs_hops(n: u32, edges: &[(NodeId, NodeId)], src: NodeId, dst: NodeId) -> Option<u32> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut dist = vec![None; n as usize];
    dist[src as usize] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(x) = q.pop_front() {
        for &y in adj.get(&x).into_iter().flatten() {
            if dist[y as usize].is_none() {
                dist[y as usize] = Some(dist[x as usize].unwrap() + 1);
                q.push_back(y);
            }
        }
    }
    dist[dst as usize]
}

fn net(latency: u32, p_loss: f64, seed: u64) -> Network<&'static str> {
    Network::new(NetConfig { base_latency: latency, p_link_loss: p_loss, ..NetConfig::default() }, seed)
}

#[test]
fn network_properties() {
    let start = Instant::now();
    let mut r = rng(5);
    let cases = 1000;

    // delivery within hops * latency on a lossless connected graph
    let mut late = 0;
    for case in 0..cases {
        let n = r.gen_range(2..=12);
        let extra = r.gen_range(0..n as usize);
        let edges = connected_graph(&mut r, n, extra);
        let lat = r.gen_range(1..=3);
        let mut nw = net(lat, 0.0, case);
        nw.set_topology(Topology::from_edges(0..n, edges.clone()));
        let (src, dst) = (r.gen_range(0..n), r.gen_range(0..n));
        let hops = bfs_hops(n, &edges, src, dst).unwrap();
        let t0 = r.gen_range(0..50);
        nw.send(src, dst, "m", t0);
        let bound = t0 + (hops * lat) as u64;
        let got: Vec<_> = (t0..=bound + 5).flat_map(|t| nw.deliver(t)).collect();
        if got.len() != 1 || got[0].tick > bound.max(t0 + lat as u64) || got[0].hops != hops {
            late += 1;
        }
    }

    // a route edge fails mid-flight while the graph stays connected
    let (mut healed, mut lost, mut tried) = (0, 0, 0);
    while tried < cases {
        let n = r.gen_range(3..=12);
        let extra = r.gen_range(1..=n as usize);
        let edges = connected_graph(&mut r, n, extra);
        let topo = Topology::from_edges(0..n, edges.clone());
        let (src, dst) = (r.gen_range(0..n), r.gen_range(0..n));
        let Some(route) = topo.route(src, dst).unwrap() else { continue };
        let mut path = vec![src];
        path.extend(route);
        let candidates: Vec<(NodeId, NodeId)> = path
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .filter(|e| {
                let rest: Vec<_> = edges.iter().copied().filter(|x| x != e).collect();
                bfs_hops(n, &rest, e.0, e.1).is_some()
            })
            .collect();
        let Some(&cut) = candidates.choose(&mut r) else { continue };
        tried += 1;
        let mut nw = net(1, 0.0, tried);
        nw.set_topology(topo);
        nw.send(src, dst, "m", 0);
        let when = r.gen_range(0..path.len() as u64);
        let mut got = 0;
        for t in 0..200 {
            if t == when {
                let rest: Vec<_> = edges.iter().copied().filter(|x| *x != cut).collect();
                nw.set_topology(Topology::from_edges(0..n, rest));
            }
            got += nw.deliver(t).len();
        }
        if got == 1 {
            healed += 1;
        } else {
            lost += 1;
        }
    }

    // nothing crosses a partition that lasts the message's whole lifetime
    let mut phantom = 0;
    for case in 0..cases {
        let (na, nb) = (r.gen_range(1..=6u32), r.gen_range(1..=6u32));
        let side_a = connected_graph(&mut r, na, 2);
        let side_b: Vec<_> = connected_graph(&mut r, nb, 2).into_iter().map(|(a, b)| (a + na, b + na)).collect();
        let all: Vec<_> = side_a.iter().chain(&side_b).copied().collect();
        let mut nw = net(r.gen_range(1..=2), r.gen_range(0.0..0.3), case);
        nw.set_topology(Topology::from_edges(0..na + nb, all.clone()));
        let (src, dst) = (r.gen_range(0..na), na + r.gen_range(0..nb));
        nw.send_with_ttl(src, dst, "u", 0, 40);
        nw.broadcast(src, "b", 0);
        for t in 0..80 {
            if t % 10 == 5 {
                // rewire inside each side only
                let a = connected_graph(&mut r, na, 2);
                let b = connected_graph(&mut r, nb, 2).into_iter().map(|(x, y)| (x + na, y + na));
                nw.set_topology(Topology::from_edges(0..na + nb, a.into_iter().chain(b)));
            }
            phantom += nw.deliver(t).iter().filter(|d| d.dst >= na).count();
        }
    }

    let ok = late == 0 && lost == 0 && phantom == 0;
    report(
        "network properties",
        ok,
        format!("{cases} bound cases ({late} late), {healed}/{tried} healed after a link cut, {phantom} phantom deliveries over {cases} partitions"),
        start.elapsed(),
    );
}

// ---------------------------------------------------------------- sensors

fn within_3_sigma(hits: u64, n: u64, p: f64) -> bool {
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - n as f64 * p).abs() <= 3.0 * sd + 1e-9
}

#[test]
fn sensor_statistics() {
    let start = Instant::now();
    let n = 100_000u64;
    let table = SensorTable::default();
    let profiles = ThreatProfiles::default();
    let grid = WorldGrid::uniform(3, 3, Terrain::Sand).unwrap();
    let mut r = rng(77);
    let mut out = Vec::new();
    let mut ok = true;
    for model in table.iter() {
        let threat = aidedex::world::Threat { depth: r.gen_range(0.0..0.5) * model.max_depth, ..profiles.sample(ThreatId(0), 4, &mut r) };
        let threats = vec![threat.clone()];
        let mut threat_at = vec![None; 9];
        threat_at[4] = Some(0);
        let target = ScanTarget { grid: &grid, threats: &threats, threat_at: &threat_at };
        let (mut det, mut fp, mut fp_n) = (0u64, 0u64, 0u64);
        for k in 0..n {
            let rd = scan(model, (1.5, 1.5), &LocalizationNoise::NONE, target, &mut r, ReadingId { robot: 1, seq: k as u32 }, 0);
            for (c, d) in rd.cells.iter().zip(&rd.detections) {
                if *c == 4 {
                    det += *d as u64;
                } else {
                    fp_n += 1;
                    fp += *d as u64;
                }
            }
        }
        let p = model.p_det(&threat);
        let good = within_3_sigma(det, n, p) && (fp_n == 0 || within_3_sigma(fp, fp_n, model.p_fp));
        ok &= good;
        out.push(format!("{} {:.4}/{:.4}", model.kind.name(), det as f64 / n as f64, p));
    }

    for p_loss in [0.02, 0.2] {
        let mut nw = net(1, p_loss, 3);
        nw.set_topology(Topology::from_edges(0..2, [(0, 1)]));
        for k in 0..n {
            nw.send(0, 1, "x", k);
        }
        let delivered: u64 = (0..=n + 2).map(|t| nw.deliver(t).len() as u64).sum();
        let good = within_3_sigma(n - delivered, n, p_loss);
        ok &= good;
        out.push(format!("hop loss {:.4}/{p_loss}", (n - delivered) as f64 / n as f64));
    }
    report("sensor statistics (3 sigma, 1e5 trials)", ok, out.join(", "), start.elapsed());
}

#[test]
fn calibration_generative_match() {
    let start = Instant::now();
    let cfg = CalibrationConfig::default();
    let r = calibration_harness(&cfg, &SensorTable::default(), &ThreatProfiles::default(), 1).unwrap();
    let f = r.target.frequency().unwrap_or(f64::NAN);
    let ok = r.target.cells >= 10_000 && (0.75..=0.95).contains(&f);
    report(
        "calibration (generative match)",
        ok,
        format!("{} cells with posterior in [0.8,0.9] over {} runs, threat frequency {f:.4}", r.target.cells, r.runs),
        start.elapsed(),
    );
}

#[test]
fn limiting_case_recall() {
    let start = Instant::now();
    let mut found = 0;
    let mut total = 0;
    let mut not_complete = Vec::new();
    for seed in 1..=10 {
        let mode = if seed % 2 == 0 { ControllerMode::Mns } else { ControllerMode::Centralized };
        let mut s = scenario(300 + seed, mode);
        s.fleet_config.sensors = SensorTable::perfect();
        s.fleet_config.localization = LocalizationNoise::NONE;
        s.mission_config.clamp_degenerate = true;
        let r = run(&s, RunOptions::default()).unwrap();
        if r.metrics.outcome != "complete" {
            not_complete.push(seed);
        }
        let surface: Vec<_> = s.threats.iter().filter(|t| t.depth == 0.0).map(|t| (t.cell, t.class)).collect();
        let cells: Vec<_> = r.candidates.iter().map(|c| c.cell).collect();
        let matched = match_candidates(&s.grid, &cells, &surface);
        total += surface.len();
        found += (0..surface.len()).filter(|i| matched.contains(&Some(*i))).count();
    }
    let ok = found == total && total > 0 && not_complete.is_empty();
    report("limiting-case recall", ok, format!("{found}/{total} surface threats found over 10 scenarios"), start.elapsed());
}

// ---------------------------------------------------------------- planning

/// Breadth-first step distance over 8-neighbours, written independently of the planner.
fn bfs_oracle(grid: &WorldGrid, from: usize, to: usize, kind: RobotKind) -> Option<usize> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let ok = |c: usize| traversable(grid, c, kind).unwrap_or(false);
    if !ok(from) || !ok(to) {
        return None;
    }
    let mut dist = vec![usize::MAX; grid.len()];
    dist[from] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        let (x, y) = (c as i64 % w, c as i64 / w);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let nc = (ny * w + nx) as usize;
                if dist[nc] == usize::MAX && ok(nc) {
                    dist[nc] = dist[c] + 1;
                    q.push_back(nc);
                }
            }
        }
    }
    (dist[to] != usize::MAX).then_some(dist[to])
}

#[test]
fn path_planning_matches_bfs() {
    let start = Instant::now();
    let mut r = rng(42);
    let mut mismatches = 0;
    let mut reachable = 0;
    for _ in 0..500 {
        let (w, h) = (r.gen_range(2..=30u32), r.gen_range(2..=30u32));
        let mut grid = WorldGrid::uniform(w, h, Terrain::Gravel).unwrap();
        let density = r.gen_range(0.0..0.45);
        for c in 0..grid.len() {
            let cell = grid.cell_mut(c);
            cell.obstacle = r.gen_bool(density);
            cell.indoor = r.gen_bool(0.1);
        }
        let kind = *[RobotKind::Sugv, RobotKind::Lugv, RobotKind::Suav, RobotKind::Luav].choose(&mut r).unwrap();
        let (from, to) = (r.gen_range(0..grid.len()), r.gen_range(0..grid.len()));
        let want = bfs_oracle(&grid, from, to, kind);
        let got = plan_path(&grid, from, to, kind).ok();
        let valid = got.as_ref().is_none_or(|p| {
            p.first() == Some(&from)
                && p.last() == Some(&to)
                && p.iter().all(|&c| traversable(&grid, c, kind).unwrap())
                && p.windows(2).all(|s| grid.chebyshev(s[0], s[1]) == 1)
        });
        reachable += want.is_some() as usize;
        if !valid || got.map(|p| p.len() - 1) != want {
            mismatches += 1;
        }
    }
    report(
        "path planning vs BFS oracle",
        mismatches == 0,
        format!("500 grids ({reachable} reachable pairs), {mismatches} mismatches"),
        start.elapsed(),
    );
}
