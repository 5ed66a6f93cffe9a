use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::log::{r9, EventLog, LogHeader, LogRecord, RecordBody, RobotEntry, RobotSnap, ThreatTruth, LOG_FORMAT, LOG_VERSION};
use super::{rng_stream, EngineError, FaultSchedule, ResolvedFaults, StreamPurpose};
use crate::fleet::{default_fleet, Fleet, RobotId, RobotKind};
use crate::fusion::{Candidate, CandidateStatus, FusionModels, ThreatHeatmap};
use crate::mission::metrics::{score, Scored};
use crate::mission::{
    Coordinator, MessageMetrics, MetricsReport, MissionContext, MissionError, MissionEvent, MissionPhase, Msg, OperatorCommand, PhaseTicks,
    RobotAgent, TaskId, METRICS_SCHEMA_VERSION,
};
use crate::netsim::{NetStats, Network, NodeId, Topology, COMMAND_CENTRE};
use crate::sensors::ScanTarget;
use crate::world::{ControllerMode, Scenario};

/// Ticks between robot snapshots and coverage samples.
pub const SAMPLE_EVERY: u64 = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Upper bound on ticks; 0 records the initial snapshot only.
    pub max_ticks: u64,
    /// Phase transitions at the command centre wait for operator approval.
    pub supervised: bool,
    pub faults: FaultSchedule,
    /// Fusion models to use instead of the nominal ones.
    pub models: Option<FusionModels>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_ticks: 5000, supervised: false, faults: FaultSchedule::default(), models: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Advanced,
    Paused,
    Finished,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub log: EventLog,
    pub metrics: MetricsReport,
    /// The reference coordinator's final map.
    pub heatmap: ThreatHeatmap,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub id: RobotId,
    pub name: String,
    pub kind: RobotKind,
    pub x: f64,
    pub y: f64,
    pub battery_s: f64,
    pub alive: bool,
    pub task: Option<TaskId>,
    pub returning: bool,
    pub coordinator: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSnapshot {
    pub id: u32,
    pub x: u32,
    pub y: u32,
    pub posterior: f64,
    pub status: CandidateStatus,
    pub class: Option<crate::world::ThreatClass>,
    pub class_posterior: [f64; 3],
}

/// Operator-facing picture of the run, taken from the reference coordinator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub mode: ControllerMode,
    pub phase: MissionPhase,
    pub proposal: Option<MissionPhase>,
    pub reference_node: NodeId,
    /// Bumped whenever the network splits or merges.
    pub partition_epoch: u64,
    pub partitions: Vec<Vec<NodeId>>,
    pub coverage: f64,
    pub paused: bool,
    pub finished: bool,
    pub robots: Vec<RobotSnapshot>,
    pub candidates: Vec<CandidateSnapshot>,
}

/// A running mission. Drive it with [`Simulation::step`] or [`Simulation::run_to_end`].
pub struct Simulation {
    scenario: Scenario,
    ctx: Arc<MissionContext>,
    mode: ControllerMode,
    options: RunOptions,
    faults: ResolvedFaults,
    fleet: Fleet,
    names: BTreeMap<RobotId, String>,
    agents: BTreeMap<RobotId, RobotAgent>,
    coords: BTreeMap<NodeId, Coordinator>,
    rngs: BTreeMap<RobotId, ChaCha8Rng>,
    net: Network<Msg>,
    threat_at: Vec<Option<usize>>,
    tick: u64,
    brains: BTreeMap<NodeId, NodeId>,
    partitions: Vec<Vec<NodeId>>,
    epoch: u64,
    header: LogHeader,
    records: Vec<LogRecord>,
    last_stats: NetStats,
    samples: BTreeMap<NodeId, Vec<(u64, f64)>>,
    paused: bool,
    outcome: Option<String>,
    operator_dismissed: usize,
    robots_failed: u32,
}

impl Simulation {
    pub fn new(scenario: Scenario, options: RunOptions) -> Result<Simulation, EngineError> {
        scenario.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        scenario.mission_config.validate().map_err(EngineError::Config)?;
        scenario.net_config.validate().map_err(EngineError::Config)?;
        scenario.fleet_config.validate().map_err(EngineError::Config)?;
        let ctx = match options.models.clone() {
            Some(m) => MissionContext::with_models(&scenario, m),
            None => MissionContext::new(&scenario).map_err(|e| EngineError::Config(e.to_string()))?,
        };
        let ctx = Arc::new(ctx);
        let faults = options.faults.resolve(&ctx)?;
        let fleet = default_fleet(&scenario.fleet_config, &scenario.grid);
        let seed = scenario.seed;
        let mode = scenario.controller_mode;
        let mut coords = BTreeMap::new();
        coords.insert(COMMAND_CENTRE, Coordinator::new(COMMAND_CENTRE, ctx.clone(), options.supervised));
        let mut agents = BTreeMap::new();
        let mut rngs = BTreeMap::new();
        let mut names = BTreeMap::new();
        for r in &fleet.robots {
            coords.insert(r.id, Coordinator::new(r.id, ctx.clone(), false));
            agents.insert(r.id, RobotAgent::new(r.id, ctx.clone()));
            rngs.insert(r.id, rng_stream(seed, r.id, StreamPurpose::Scan));
            names.insert(r.id, r.name.clone());
        }
        let header = LogHeader {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            mode: mode.to_string(),
            seed,
            supervised: options.supervised,
            max_ticks: options.max_ticks,
            width: scenario.grid.width(),
            height: scenario.grid.height(),
            reachable: ctx.reachable_count,
            robots: fleet.robots.iter().map(|r| RobotEntry { id: r.id, name: r.name.clone() }).collect(),
            threats: scenario.threats.iter().map(|t| ThreatTruth { id: t.id.0, cell: t.cell, class: t.class }).collect(),
        };
        let net = Network::new(scenario.net_config.clone(), seed);
        let threat_at = scenario.threat_index();
        let mut sim = Simulation {
            ctx,
            mode,
            faults,
            fleet,
            names,
            agents,
            coords,
            rngs,
            net,
            threat_at,
            tick: 0,
            brains: BTreeMap::new(),
            partitions: Vec::new(),
            epoch: 0,
            header,
            records: Vec::new(),
            last_stats: NetStats::default(),
            samples: BTreeMap::new(),
            paused: false,
            outcome: None,
            operator_dismissed: 0,
            robots_failed: 0,
            options,
            scenario,
        };
        sim.drain_events(0);
        sim.snapshot_record(0);
        if sim.options.max_ticks == 0 {
            sim.finish("incomplete");
        }
        Ok(sim)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn coordinator(&self, node: NodeId) -> Option<&Coordinator> {
        self.coords.get(&node)
    }

    pub fn agent(&self, robot: RobotId) -> Option<&RobotAgent> {
        self.agents.get(&robot)
    }

    pub fn network(&self) -> &Network<Msg> {
        &self.net
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Current brain of every live node.
    pub fn brains(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.brains
    }

    /// Node with the most advanced phase, lowest id among equals.
    pub fn reference_node(&self) -> NodeId {
        let mut best = (MissionPhase::Explore, COMMAND_CENTRE);
        for (&n, c) in &self.coords {
            if c.phase() > best.0 {
                best = (c.phase(), n);
            }
        }
        best.1
    }

    pub fn reference(&self) -> &Coordinator {
        &self.coords[&self.reference_node()]
    }

    fn push(&mut self, node: NodeId, body: RecordBody) {
        self.records.push(LogRecord { tick: self.tick, node, body });
    }

    /// Applies an operator command at the current tick boundary.
    pub fn apply_command(&mut self, cmd: OperatorCommand) -> Result<(), MissionError> {
        let result = if self.is_finished() {
            Err(MissionError::InvalidCommand("the run has finished".into()))
        } else {
            match &cmd {
                OperatorCommand::Pause => {
                    self.paused = true;
                    Ok(())
                }
                OperatorCommand::Resume => {
                    self.paused = false;
                    Ok(())
                }
                OperatorCommand::Abort => Ok(()),
                other => {
                    let tick = self.tick;
                    self.coords.get_mut(&COMMAND_CENTRE).unwrap().apply_command(other, tick)
                }
            }
        };
        if result.is_ok() && matches!(cmd, OperatorCommand::DismissCandidate { .. }) {
            self.operator_dismissed += 1;
        }
        let error = result.as_ref().err().map(|e| e.to_string());
        let aborted = result.is_ok() && cmd == OperatorCommand::Abort;
        if !self.is_finished() {
            self.push(COMMAND_CENTRE, RecordBody::Operator { command: cmd, accepted: result.is_ok(), error });
            self.drain_events(self.tick);
        }
        if aborted {
            self.finish("aborted");
        }
        result
    }

    fn positions(&self) -> BTreeMap<NodeId, (f64, f64)> {
        let [cx, cy] = self.scenario.net_config.command_centre_pos;
        let mut p = BTreeMap::from([(COMMAND_CENTRE, (cx, cy))]);
        for r in self.fleet.alive() {
            p.insert(r.id, (r.pose.x, r.pose.y));
        }
        p
    }

    fn update_topology(&mut self, t: u64) {
        let outages = self.faults.outages_at(t);
        let topo = Topology::build(&self.positions(), self.scenario.net_config.radio_range, &outages);
        let parts = topo.partitions();
        if parts != self.partitions {
            self.epoch += 1;
            for comp in &parts {
                self.push(comp[0], RecordBody::Partition { epoch: self.epoch, members: comp.clone() });
            }
            self.partitions = parts.clone();
        }
        let mut brains = BTreeMap::new();
        for comp in &parts {
            for &n in comp {
                let b = match self.mode {
                    ControllerMode::Mns => comp[0],
                    ControllerMode::Centralized => COMMAND_CENTRE,
                };
                brains.insert(n, b);
            }
        }
        // a coordinator that loses its role hands its knowledge to the new brain
        for (&n, &b) in &brains {
            let was_brain = self.brains.get(&n) == Some(&n);
            if was_brain && b != n && self.coords[&n].has_knowledge() {
                let bundle = self.coords[&n].sync_bundle();
                self.net.send(n, b, Msg::Sync(Box::new(bundle)), t);
            }
        }
        for (&id, agent) in self.agents.iter_mut() {
            let Some(&b) = brains.get(&id) else {
                continue;
            };
            let comp = parts.iter().find(|c| c.contains(&id));
            let reachable = b == id || comp.is_some_and(|c| c.contains(&b));
            let anchored = comp.is_some_and(|c| c.contains(&COMMAND_CENTRE));
            agent.set_coordinator(b, reachable, anchored, t);
        }
        self.brains = brains;
        self.net.set_topology(topo);
    }

    fn component_of(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.partitions.iter().find(|c| c.contains(&n)).map(|c| c.iter().copied().collect()).unwrap_or_default()
    }

    fn alive(&self, n: NodeId) -> bool {
        n == COMMAND_CENTRE || self.fleet.get(n).is_some_and(|r| r.is_alive())
    }

    /// Routes a batch of outgoing messages: local ones straight to the node's
    /// own roles, the rest onto the radio.
    fn dispatch(&mut self, src: NodeId, out: Vec<(NodeId, Msg)>, t: u64, fusion: &mut BTreeMap<NodeId, Vec<(NodeId, Msg)>>) {
        for (dst, msg) in out {
            if dst != src {
                self.net.send(src, dst, msg, t);
                continue;
            }
            match &msg {
                Msg::Readings(_) | Msg::Sync(_) => fusion.entry(src).or_default().push((src, msg)),
                Msg::Status(_) => self.coords.get_mut(&src).unwrap().receive(src, &msg, t),
                Msg::Ack(_) | Msg::Assign(_) | Msg::Release(_) => {
                    if let (Some(agent), Some(robot)) = (self.agents.get_mut(&src), self.fleet.get(src)) {
                        agent.handle(src, &msg, robot);
                    }
                }
            }
        }
    }

    /// Advances one tick.
    pub fn step(&mut self) -> StepOutcome {
        if self.is_finished() {
            return StepOutcome::Finished;
        }
        if self.paused {
            return StepOutcome::Paused;
        }
        let t = self.tick;
        let dt = self.ctx.config.dt;

        // faults
        for what in self.faults.edges_at(t) {
            self.push(COMMAND_CENTRE, RecordBody::Fault { what });
        }
        if let Some(ids) = self.faults.failures.get(&t).cloned() {
            for id in ids {
                if self.fleet.fail_robot(id).unwrap_or(false) {
                    self.robots_failed += 1;
                    self.push(id, RecordBody::RobotFailed { robot: id });
                    for c in self.coords.values_mut() {
                        c.robot_failed(id);
                    }
                }
            }
        }
        self.net.set_loss_override(self.faults.jamming_at(t));

        // topology and roles
        self.update_topology(t);

        // deliveries
        let mut fusion: BTreeMap<NodeId, Vec<(NodeId, Msg)>> = BTreeMap::new();
        for d in self.net.deliver(t) {
            if !self.alive(d.dst) {
                continue;
            }
            match &d.payload {
                Msg::Readings(_) | Msg::Sync(_) => fusion.entry(d.dst).or_default().push((d.src, d.payload)),
                Msg::Status(_) => self.coords.get_mut(&d.dst).unwrap().receive(d.src, &d.payload, t),
                Msg::Ack(_) | Msg::Assign(_) | Msg::Release(_) => {
                    if let (Some(agent), Some(robot)) = (self.agents.get_mut(&d.dst), self.fleet.get(d.dst)) {
                        agent.handle(d.src, &d.payload, robot);
                    }
                }
            }
        }

        // controllers
        for (&id, agent) in self.agents.iter_mut() {
            if let Some(robot) = self.fleet.get_mut(id) {
                agent.control(robot, t);
            }
        }
        let brains: Vec<NodeId> = self.brains.iter().filter(|(n, b)| n == b).map(|(n, _)| *n).collect();
        for n in brains {
            let comp = self.component_of(n);
            let c = self.coords.get_mut(&n).unwrap();
            c.step(t, &comp);
            let out = c.take_outbox();
            self.dispatch(n, out, t, &mut fusion);
        }

        // motion and scans
        let ids: Vec<RobotId> = self.agents.keys().copied().collect();
        for id in ids {
            let (Some(agent), Some(robot), Some(rng)) = (self.agents.get_mut(&id), self.fleet.get_mut(id), self.rngs.get_mut(&id)) else {
                continue;
            };
            if !robot.is_alive() {
                continue;
            }
            let reached = agent.motion(robot, dt);
            let target = ScanTarget { grid: &self.scenario.grid, threats: &self.scenario.threats, threat_at: &self.threat_at };
            agent.scan(robot, &reached, target, rng, t);
            agent.flush(robot, t);
            let out = agent.take_outbox();
            self.dispatch(id, out, t, &mut fusion);
        }

        // fusion owners
        for (n, msgs) in fusion {
            if !self.alive(n) {
                continue;
            }
            let c = self.coords.get_mut(&n).unwrap();
            for (src, m) in &msgs {
                c.receive(*src, m, t);
            }
            let out = c.take_outbox();
            self.dispatch(n, out, t, &mut BTreeMap::new());
        }
        for c in self.coords.values_mut() {
            c.flush_coverage();
        }

        self.drain_events(t);
        let s = self.net.stats().clone();
        let d = |a: u64, b: u64| a - b;
        let delta = (
            d(s.sent, self.last_stats.sent),
            d(s.delivered, self.last_stats.delivered),
            d(s.lost, self.last_stats.lost),
            d(s.expired, self.last_stats.expired),
            d(s.node_down, self.last_stats.node_down),
        );
        if delta != (0, 0, 0, 0, 0) {
            self.push(
                COMMAND_CENTRE,
                RecordBody::Net { sent: delta.0, delivered: delta.1, lost: delta.2, expired: delta.3, node_down: delta.4 },
            );
        }
        self.last_stats = s;
        if t.is_multiple_of(SAMPLE_EVERY) {
            for (&n, c) in &self.coords {
                self.samples.entry(n).or_default().push((t, c.coverage()));
            }
        }
        self.tick = t + 1;
        if t % SAMPLE_EVERY == SAMPLE_EVERY - 1 {
            self.snapshot_record(self.tick);
        }
        if self.coords.values().any(|c| c.phase() == MissionPhase::Complete) {
            self.finish("complete");
        } else if self.tick >= self.options.max_ticks {
            self.finish("incomplete");
        }
        StepOutcome::Advanced
    }

    fn drain_events(&mut self, t: u64) {
        let nodes: Vec<NodeId> = self.coords.keys().copied().collect();
        for n in nodes {
            for e in self.coords.get_mut(&n).unwrap().take_events() {
                let body = match e {
                    MissionEvent::Assign { task, robot } => RecordBody::Assign { task, robot },
                    MissionEvent::TaskState { task, state } => RecordBody::Task { task, state },
                    MissionEvent::Phase { from, to } => RecordBody::Phase { from, to },
                    MissionEvent::Proposal { to } => RecordBody::Proposal { to },
                    MissionEvent::Candidate { id, cell, status, posterior, class } => RecordBody::Candidate { id, cell, status, posterior: r9(posterior), class },
                    MissionEvent::Coverage { covered, reachable } => RecordBody::Coverage { covered, reachable },
                };
                self.records.push(LogRecord { tick: t, node: n, body });
            }
        }
    }

    fn snapshot_record(&mut self, tick: u64) {
        let robots = self
            .fleet
            .robots
            .iter()
            .map(|r| RobotSnap {
                id: r.id,
                x: r9(r.pose.x),
                y: r9(r.pose.y),
                battery_s: r9(r.battery_s),
                alive: r.is_alive(),
                task: self.agents.get(&r.id).and_then(|a| a.current_task()),
            })
            .collect();
        self.records.push(LogRecord { tick, node: COMMAND_CENTRE, body: RecordBody::Snapshot { robots } });
    }

    fn finish(&mut self, outcome: &str) {
        if self.outcome.is_some() {
            return;
        }
        let sha = heatmap_sha256(self.reference().heatmap());
        self.outcome = Some(outcome.to_string());
        self.push(COMMAND_CENTRE, RecordBody::End { outcome: outcome.to_string(), heatmap_sha256: sha });
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            if self.step() == StepOutcome::Paused {
                self.paused = false;
            }
        }
    }

    /// Live metrics from the current state (final once the run has finished).
    pub fn metrics(&self) -> MetricsReport {
        let reference = self.reference_node();
        let c = &self.coords[&reference];
        let mut phase_ticks = PhaseTicks::default();
        for (&p, &t) in c.phase_ticks() {
            phase_ticks.set(p, t);
        }
        let cands: Vec<_> = c
            .candidates()
            .values()
            .map(|r| {
                let cl = (r.candidate.status == CandidateStatus::Classified).then(|| r.candidate.best_class().0);
                (r.candidate.cell, r.candidate.status, cl)
            })
            .collect();
        let threats: Vec<_> = self.scenario.threats.iter().map(|t| (t.cell, t.class)).collect();
        let s = score(&self.scenario.grid, &cands, &threats);
        let st = self.net.stats();
        let mut messages =
            MessageMetrics { sent: st.sent, delivered: st.delivered, lost: st.lost, expired: st.expired, node_down: st.node_down, loss_rate: 0.0 };
        messages.finish();
        let mut series = self.samples.get(&reference).cloned().unwrap_or_default();
        if series.last().map(|s| s.0) != Some(self.tick) {
            series.push((self.tick, c.coverage()));
        }
        let outcome = self.outcome.clone().unwrap_or_else(|| "incomplete".into());
        build_report(
            &self.header,
            self.tick,
            outcome,
            c.phase(),
            phase_ticks,
            reference,
            c.coverage(),
            series,
            s,
            self.operator_dismissed,
            messages,
            self.robots_failed,
        )
    }

    pub fn event_log(&self) -> EventLog {
        EventLog { header: self.header.clone(), records: self.records.clone() }
    }

    pub fn into_result(self) -> RunResult {
        let metrics = self.metrics();
        let reference = self.reference();
        RunResult {
            log: self.event_log(),
            metrics,
            heatmap: reference.heatmap().clone(),
            candidates: reference.candidates().values().map(|r| r.candidate.clone()).collect(),
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let reference = self.reference_node();
        let c = &self.coords[&reference];
        let w = self.scenario.grid.width();
        StateSnapshot {
            tick: self.tick,
            mode: self.mode,
            phase: c.phase(),
            proposal: self.coords[&COMMAND_CENTRE].proposal(),
            reference_node: reference,
            partition_epoch: self.epoch,
            partitions: self.partitions.clone(),
            coverage: r9(c.coverage()),
            paused: self.paused,
            finished: self.is_finished(),
            robots: self
                .fleet
                .robots
                .iter()
                .map(|r| {
                    let a = self.agents.get(&r.id);
                    RobotSnapshot {
                        id: r.id,
                        name: self.names[&r.id].clone(),
                        kind: r.kind,
                        x: r9(r.pose.x),
                        y: r9(r.pose.y),
                        battery_s: r9(r.battery_s),
                        alive: r.is_alive(),
                        task: a.and_then(|a| a.current_task()),
                        returning: a.is_some_and(|a| a.is_returning()),
                        coordinator: a.and_then(|a| a.coordinator()),
                    }
                })
                .collect(),
            candidates: c
                .candidates()
                .values()
                .map(|r| {
                    let cand = &r.candidate;
                    CandidateSnapshot {
                        id: cand.id,
                        x: cand.cell as u32 % w,
                        y: cand.cell as u32 / w,
                        posterior: r9(cand.posterior),
                        status: cand.status,
                        class: (cand.status == CandidateStatus::Classified).then(|| cand.best_class().0),
                        class_posterior: cand.class_posterior().map(r9),
                    }
                })
                .collect(),
        }
    }
}

pub(crate) fn heatmap_sha256(h: &ThreatHeatmap) -> String {
    let mut hasher = Sha256::new();
    for d in h.deltas() {
        hasher.update(d.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    header: &LogHeader,
    ticks: u64,
    outcome: String,
    phase: MissionPhase,
    phase_ticks: PhaseTicks,
    reference: NodeId,
    coverage: f64,
    coverage_series: Vec<(u64, f64)>,
    s: Scored,
    operator_dismissed: usize,
    messages: MessageMetrics,
    robots_failed: u32,
) -> MetricsReport {
    MetricsReport {
        schema_version: METRICS_SCHEMA_VERSION,
        mode: header.mode.clone(),
        seed: header.seed,
        ticks,
        outcome,
        phase_reached: phase,
        phase_ticks,
        reference_node: reference,
        coverage: r9(coverage),
        coverage_series: coverage_series.into_iter().map(|(t, c)| (t, r9(c))).collect(),
        threats: header.threats.len(),
        candidates: s.candidates,
        declared: s.declared,
        true_positives: s.true_positives,
        recall: s.recall.map(r9),
        precision: s.precision.map(r9),
        false_candidates: s.false_candidates,
        classified: s.classified,
        classification_accuracy: s.classification_accuracy.map(r9),
        dismissed: s.dismissed,
        operator_dismissed,
        messages: MessageMetrics { loss_rate: r9(messages.loss_rate), ..messages },
        robots_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{replay, run};
    use crate::world::{generate_scenario, ScenarioParams};

    fn small(seed: u64, threats: usize, mode: ControllerMode) -> Scenario {
        let p = ScenarioParams { controller_mode: mode, ..ScenarioParams::sized(24, 24, threats) };
        generate_scenario(&p, seed).unwrap()
    }

    #[test]
    fn same_seed_same_log() {
        let s = small(3, 4, ControllerMode::Mns);
        let a = run(&s, RunOptions::default()).unwrap();
        let b = run(&s, RunOptions::default()).unwrap();
        assert_eq!(a.log.hash(), b.log.hash());
        let other = run(&small(4, 4, ControllerMode::Mns), RunOptions::default()).unwrap();
        assert_ne!(a.log.hash(), other.log.hash());
    }

    #[test]
    fn zero_ticks_is_a_snapshot_and_an_end() {
        let s = small(1, 2, ControllerMode::Centralized);
        let r = run(&s, RunOptions { max_ticks: 0, ..Default::default() }).unwrap();
        let kinds: Vec<_> = r.log.records.iter().filter(|r| !matches!(r.body, RecordBody::Task { .. })).map(|r| &r.body).collect();
        assert!(matches!(kinds[0], RecordBody::Snapshot { .. }));
        assert!(matches!(kinds.last().unwrap(), RecordBody::End { outcome, .. } if outcome == "incomplete"));
        assert_eq!(kinds.len(), 2);
        assert_eq!(r.metrics.ticks, 0);
        assert_eq!(r.metrics.coverage_series, vec![(0, 0.0)]);
    }

    #[test]
    fn zero_threats_still_completes() {
        for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
            let r = run(&small(5, 0, mode), RunOptions::default()).unwrap();
            assert_eq!(r.metrics.outcome, "complete", "{mode}");
            assert!(r.metrics.coverage >= 0.9);
            assert_eq!(r.metrics.recall, None);
            assert!(r.metrics.phase_ticks.confirmation.is_some());
        }
    }

    #[test]
    fn replay_matches_live() {
        for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
            let faults = FaultSchedule::default().push(super::super::Fault::RobotFailure { robot: "SUGV-2".into(), tick: 200 });
            let r = run(&small(2, 4, mode), RunOptions { faults, ..Default::default() }).unwrap();
            let text = r.log.to_jsonl();
            assert_eq!(replay(&text).unwrap(), r.metrics);
            assert_eq!(replay(&text).unwrap(), replay(&text).unwrap());
            assert_eq!(r.metrics.robots_failed, 1);
        }
    }

    #[test]
    fn failure_lands_on_its_tick() {
        let faults = FaultSchedule::default().push(super::super::Fault::RobotFailure { robot: "SUGV-1".into(), tick: 37 });
        let r = run(&small(2, 3, ControllerMode::Centralized), RunOptions { faults, ..Default::default() }).unwrap();
        let at: Vec<u64> = r.log.records.iter().filter(|r| matches!(r.body, RecordBody::RobotFailed { .. })).map(|r| r.tick).collect();
        assert_eq!(at, vec![37]);
        assert!(r.log.assignments().iter().filter(|a| a.2 == 4).all(|a| r.log.records.iter().any(|rec| rec.tick < 37 && matches!(rec.body, RecordBody::Assign { task, robot: 4 } if task == a.1))));
    }

    #[test]
    fn supervised_run_waits_for_approval() {
        let s = small(1, 2, ControllerMode::Centralized);
        let mut sim = Simulation::new(s, RunOptions { supervised: true, ..Default::default() }).unwrap();
        assert!(sim.apply_command(OperatorCommand::ApprovePhase).is_err());
        while sim.coordinator(0).unwrap().proposal().is_none() {
            assert_eq!(sim.step(), StepOutcome::Advanced);
        }
        let held = sim.tick();
        for _ in 0..50 {
            sim.step();
        }
        assert_eq!(sim.coordinator(0).unwrap().phase(), MissionPhase::Explore, "held since tick {held}");
        sim.apply_command(OperatorCommand::ApprovePhase).unwrap();
        sim.step();
        assert_eq!(sim.coordinator(0).unwrap().phase(), MissionPhase::SpecialisedDetection);
    }

    #[test]
    fn pause_resume_abort() {
        let mut sim = Simulation::new(small(1, 2, ControllerMode::Mns), RunOptions::default()).unwrap();
        sim.step();
        sim.apply_command(OperatorCommand::Pause).unwrap();
        assert_eq!(sim.step(), StepOutcome::Paused);
        assert_eq!(sim.tick(), 1);
        sim.apply_command(OperatorCommand::Resume).unwrap();
        assert_eq!(sim.step(), StepOutcome::Advanced);
        sim.apply_command(OperatorCommand::Abort).unwrap();
        assert_eq!(sim.step(), StepOutcome::Finished);
        let r = sim.into_result();
        assert_eq!(r.metrics.outcome, "aborted");
        assert_eq!(replay(&r.log.to_jsonl()).unwrap(), r.metrics);
    }

    #[test]
    fn bad_schedule_is_rejected_up_front() {
        let faults = FaultSchedule::default().push(super::super::Fault::RobotFailure { robot: "LUGV-7".into(), tick: 1 });
        let err = Simulation::new(small(1, 1, ControllerMode::Mns), RunOptions { faults, ..Default::default() }).err().unwrap();
        assert!(matches!(err, EngineError::InvalidSchedule(_)));
    }
}
