use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tasks::{allocate_tasks, gap_waypoints, region_waypoints, AllocationRequest};
use super::{
    MissionContext, MissionError, MissionEvent, MissionPhase, Msg, OperatorCommand, RobotStatus, RobotView, SyncBundle, Task, TaskId, TaskKind, WorkKey,
    TaskSpec, TaskState,
};
use crate::fleet::{RobotId, RobotKind, Waypoint};
use crate::fusion::{find_blobs, priority_score, Candidate, CandidateStatus, PriorityWeights, ThreatHeatmap};
use crate::netsim::NodeId;
use crate::sensors::{classify_evidence, ReadingId, SensorReading};
use crate::world::CellIndex;

/// Fixed-point scale of accumulated class log-likelihoods.
const CLASS_SCALE: f64 = (1u64 << 32) as f64;
const CLASS_LL_CAP: f64 = 1e6;
const MAX_EMI_ROUNDS: u32 = 3;
const MAX_EXPLORE_ROUNDS: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate: Candidate,
    pub created_tick: u64,
    /// Status last set by an operator command.
    pub operator: bool,
}

/// One node's view of the mission and, when it is the brain of its
/// component, the decision maker for the robots in it.
///
/// Everything here is derived from readings, robot reports and operator
/// commands; ground truth is never consulted.
#[derive(Clone, Debug)]
pub struct Coordinator {
    node: NodeId,
    ctx: Arc<MissionContext>,
    supervised: bool,
    heatmap: ThreatHeatmap,
    readings: BTreeMap<ReadingId, SensorReading>,
    covered: Vec<bool>,
    covered_count: u32,
    region_of: Vec<Option<u32>>,
    region_covered: Vec<u32>,
    vision_hits: Vec<u32>,
    spec_scanned: Vec<bool>,
    contact_scanned: Vec<bool>,
    class_ev: BTreeMap<CellIndex, [i64; 3]>,
    candidates: BTreeMap<CellIndex, CandidateRecord>,
    /// Keyed by work so a task another brain issued is recognised.
    tasks: BTreeMap<WorkKey, Task>,
    done: BTreeMap<WorkKey, TaskId>,
    rounds: BTreeMap<(TaskKind, u32), u32>,
    robots: BTreeMap<RobotId, RobotView>,
    assigned_at: BTreeMap<RobotId, u64>,
    phase: MissionPhase,
    phase_ticks: BTreeMap<MissionPhase, u64>,
    proposal: Option<MissionPhase>,
    approved: bool,
    fusion_dirty: bool,
    alloc_dirty: bool,
    /// Component seen at the last allocation; membership changes re-trigger it.
    alloc_component: BTreeSet<NodeId>,
    /// Tick the component last changed. Robots that have not reported since
    /// may hold work this node does not know about and are not allocated to.
    component_since: u64,
    logged_coverage: u32,
    operator_dismissed: BTreeSet<CellIndex>,
    operator_confirmed: BTreeSet<CellIndex>,
    events: Vec<MissionEvent>,
    outbox: Vec<(NodeId, Msg)>,
}

impl Coordinator {
    /// Fresh knowledge: every robot idle at the deployment zone, nothing scanned.
    pub fn new(node: NodeId, ctx: Arc<MissionContext>, supervised: bool) -> Coordinator {
        let n = ctx.grid.len();
        let mut region_of = vec![None; n];
        for r in &ctx.regions {
            for &c in &r.cells {
                region_of[c] = Some(r.index);
            }
        }
        let full = |kind: RobotKind| ctx.fleet.kind(kind).battery_s;
        let robots = ctx
            .roster
            .iter()
            .map(|&(id, kind)| {
                (id, RobotView { id, kind, cell: ctx.deploy, battery_s: full(kind), alive: true, task: None, returning: false, status_tick: 0 })
            })
            .collect();
        let mut c = Coordinator {
            node,
            heatmap: ThreatHeatmap::for_grid(&ctx.grid),
            readings: BTreeMap::new(),
            covered: vec![false; n],
            covered_count: 0,
            region_covered: vec![0; ctx.regions.len()],
            region_of,
            vision_hits: vec![0; n],
            spec_scanned: vec![false; n],
            contact_scanned: vec![false; n],
            class_ev: BTreeMap::new(),
            candidates: BTreeMap::new(),
            tasks: BTreeMap::new(),
            done: BTreeMap::new(),
            rounds: BTreeMap::new(),
            robots,
            assigned_at: BTreeMap::new(),
            phase: MissionPhase::Explore,
            phase_ticks: BTreeMap::from([(MissionPhase::Explore, 0)]),
            proposal: None,
            approved: false,
            fusion_dirty: false,
            alloc_dirty: true,
            alloc_component: BTreeSet::new(),
            component_since: 0,
            logged_coverage: 0,
            operator_dismissed: BTreeSet::new(),
            operator_confirmed: BTreeSet::new(),
            events: Vec::new(),
            outbox: Vec::new(),
            supervised,
            ctx,
        };
        for r in 0..c.ctx.regions.len() as u32 {
            c.ensure((TaskKind::ExploreRegion, r, 0));
        }
        c
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn context(&self) -> &Arc<MissionContext> {
        &self.ctx
    }

    pub fn phase(&self) -> MissionPhase {
        self.phase
    }

    /// Tick at which each phase was entered.
    pub fn phase_ticks(&self) -> &BTreeMap<MissionPhase, u64> {
        &self.phase_ticks
    }

    pub fn proposal(&self) -> Option<MissionPhase> {
        self.proposal
    }

    /// A proposal is pending and the operator has not answered it yet.
    pub fn awaiting_approval(&self) -> bool {
        self.proposal.is_some() && !self.approved
    }

    pub fn heatmap(&self) -> &ThreatHeatmap {
        &self.heatmap
    }

    pub fn candidates(&self) -> &BTreeMap<CellIndex, CandidateRecord> {
        &self.candidates
    }

    pub fn tasks(&self) -> &BTreeMap<WorkKey, Task> {
        &self.tasks
    }

    pub fn robot_views(&self) -> &BTreeMap<RobotId, RobotView> {
        &self.robots
    }

    pub fn integrated(&self) -> impl Iterator<Item = &ReadingId> {
        self.readings.keys()
    }

    pub fn reading_count(&self) -> usize {
        self.readings.len()
    }

    pub fn covered_count(&self) -> u32 {
        self.covered_count
    }

    /// Fraction of reachable cells covered by at least one reading.
    pub fn coverage(&self) -> f64 {
        if self.ctx.reachable_count == 0 {
            return 1.0;
        }
        self.covered_count as f64 / self.ctx.reachable_count as f64
    }

    pub fn is_covered(&self, cell: CellIndex) -> bool {
        self.covered[cell]
    }

    pub fn take_events(&mut self) -> Vec<MissionEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn take_outbox(&mut self) -> Vec<(NodeId, Msg)> {
        std::mem::take(&mut self.outbox)
    }

    /// Whether this node ever integrated anything worth handing over.
    pub fn has_knowledge(&self) -> bool {
        !self.readings.is_empty() || !self.done.is_empty()
    }

    /// Everything another coordinator needs to absorb this one's knowledge.
    pub fn sync_bundle(&self) -> SyncBundle {
        SyncBundle {
            readings: self.readings.values().cloned().collect(),
            done: self.done.values().copied().collect(),
            dismissed: self.operator_dismissed.clone(),
            confirmed: self.operator_confirmed.clone(),
        }
    }

    /// Folds one reading into the map. Returns false for a duplicate or a malformed reading.
    pub fn integrate(&mut self, r: &SensorReading) -> bool {
        if self.readings.contains_key(&r.id) || !r.is_consistent() || self.heatmap.integrate_reading(r, &self.ctx.models).is_err() {
            return false;
        }
        let model = self.ctx.fleet.sensors.get(r.kind);
        for (&cell, &hit) in r.cells.iter().zip(&r.detections) {
            if self.ctx.reachable[cell] && !self.covered[cell] {
                self.covered[cell] = true;
                self.covered_count += 1;
                if let Some(reg) = self.region_of[cell] {
                    self.region_covered[reg as usize] += 1;
                }
            }
            if r.kind.is_camera() && hit {
                self.vision_hits[cell] += 1;
            }
            if r.kind.is_specialised_ground() {
                self.spec_scanned[cell] = true;
            }
            if r.kind.is_contact() {
                self.contact_scanned[cell] = true;
            }
        }
        if let (false, Some(model)) = (r.kind.is_camera(), model) {
            for (cell, f) in r.detected_cells() {
                if let Ok(ev) = classify_evidence(f, model, &self.ctx.profiles) {
                    let acc = self.class_ev.entry(cell).or_insert([0; 3]);
                    for (a, e) in acc.iter_mut().zip(ev) {
                        *a += (e.clamp(-CLASS_LL_CAP, CLASS_LL_CAP) * CLASS_SCALE).round() as i64;
                    }
                }
            }
        }
        self.readings.insert(r.id, r.clone());
        self.fusion_dirty = true;
        true
    }

    /// Handles a message addressed to this node's coordinator role.
    pub fn receive(&mut self, src: NodeId, msg: &Msg, tick: u64) {
        match msg {
            Msg::Readings(rs) => {
                let ids: Vec<ReadingId> = rs.iter().map(|r| r.id).collect();
                for r in rs {
                    self.integrate(r);
                }
                if src != self.node && !ids.is_empty() {
                    self.outbox.push((src, Msg::Ack(ids)));
                }
            }
            Msg::Status(s) => self.apply_status(s, tick),
            Msg::Sync(b) => {
                for r in &b.readings {
                    self.integrate(r);
                }
                for t in &b.done {
                    self.mark_done(*t);
                }
                for &c in &b.dismissed {
                    self.operator_dismissed.insert(c);
                    if let Some(rec) = self.candidates.get_mut(&c) {
                        if !rec.candidate.is_resolved() && rec.candidate.dismiss().is_ok() {
                            rec.operator = true;
                            self.events.push(candidate_event(&rec.candidate));
                        }
                    }
                }
                for &c in &b.confirmed {
                    self.operator_confirmed.insert(c);
                    if let Some(rec) = self.candidates.get_mut(&c) {
                        if rec.candidate.status == CandidateStatus::Suspected && rec.candidate.confirm().is_ok() {
                            rec.operator = true;
                            self.events.push(candidate_event(&rec.candidate));
                        }
                    }
                }
                self.fusion_dirty = true;
            }
            Msg::Ack(_) | Msg::Assign(_) | Msg::Release(_) => {}
        }
    }

    fn mark_done(&mut self, id: TaskId) {
        let work = id.work();
        if self.done.contains_key(&work) {
            return;
        }
        self.done.insert(work, id);
        let r = self.rounds.entry((id.kind, id.target)).or_insert(0);
        *r = (*r).max(id.round + 1);
        if let Some(t) = self.tasks.get_mut(&work) {
            if t.state != TaskState::Done {
                t.state = TaskState::Done;
                self.events.push(MissionEvent::TaskState { task: t.id, state: TaskState::Done });
            }
        }
        for v in self.robots.values_mut() {
            if v.task.is_some_and(|t| t.work() == work) {
                v.task = None;
            }
        }
        self.fusion_dirty = true;
        self.alloc_dirty = true;
    }

    fn release(&mut self, work: WorkKey) {
        if let Some(t) = self.tasks.get_mut(&work) {
            if matches!(t.state, TaskState::Assigned { .. }) {
                t.state = TaskState::Pending;
                self.events.push(MissionEvent::TaskState { task: t.id, state: TaskState::Pending });
                self.alloc_dirty = true;
            }
        }
    }

    /// Applies a robot's self-report. Reports older than the last assignment
    /// plus the ack timeout cannot override that assignment.
    pub fn apply_status(&mut self, s: &RobotStatus, _tick: u64) {
        for t in &s.done {
            self.mark_done(*t);
        }
        let grace = self.ctx.config.ack_timeout;
        let authoritative = self.assigned_at.get(&s.robot).is_none_or(|a| s.tick >= a + grace);
        let Some(view) = self.robots.get_mut(&s.robot) else {
            return;
        };
        if !view.alive || s.tick < view.status_tick {
            return;
        }
        view.status_tick = s.tick;
        view.cell = s.cell;
        view.battery_s = s.battery_s;
        if view.returning != s.returning {
            view.returning = s.returning;
            self.alloc_dirty = true;
        }
        if !authoritative || view.task == s.task {
            return;
        }
        let old = view.task;
        view.task = s.task;
        self.alloc_dirty = true;
        if let Some(old) = old {
            if self.tasks.get(&old.work()).and_then(|t| t.assigned_robot()) == Some(s.robot) {
                self.release(old.work());
            }
        }
        if let Some(new) = s.task {
            if let Some(t) = self.tasks.get_mut(&new.work()) {
                if t.state == TaskState::Pending {
                    t.state = TaskState::Assigned { robot: s.robot, tick: s.tick };
                    self.events.push(MissionEvent::TaskState { task: t.id, state: t.state });
                }
            }
        }
    }

    /// A robot has been lost: its work goes back to the pool.
    pub fn robot_failed(&mut self, robot: RobotId) {
        let Some(v) = self.robots.get_mut(&robot) else {
            return;
        };
        if !v.alive {
            return;
        }
        v.alive = false;
        v.task = None;
        let held: Vec<WorkKey> = self.tasks.values().filter(|t| t.assigned_robot() == Some(robot)).map(|t| t.id.work()).collect();
        for t in held {
            self.release(t);
        }
        self.alloc_dirty = true;
        self.fusion_dirty = true;
    }

    fn ensure(&mut self, work: WorkKey) {
        if self.tasks.contains_key(&work) || self.done.contains_key(&work) {
            return;
        }
        let id = TaskId::new(work.0, work.1, work.2, self.node);
        let g = &self.ctx.grid;
        let targets = match id.kind {
            TaskKind::ExploreRegion => {
                let r = self.ctx.sensor_radius(crate::sensors::SensorKind::Rgb);
                let region = &self.ctx.regions[id.target as usize];
                if id.round == 0 {
                    region_waypoints(g, region, RobotKind::Suav, r, 2 * r + 1, r)
                } else {
                    gap_waypoints(g, region, RobotKind::Suav, r, &self.covered)
                }
            }
            TaskKind::GprSweep => {
                let r = self.ctx.sensor_radius(crate::sensors::SensorKind::Gpr);
                region_waypoints(g, &self.ctx.regions[id.target as usize], RobotKind::Luav, 0, r.max(1) * 2, r)
            }
            TaskKind::EmiScan | TaskKind::ConfirmCandidate => vec![id.target as CellIndex],
        };
        let state = if targets.is_empty() { TaskState::Abandoned } else { TaskState::Pending };
        self.tasks.insert(work, Task { id, targets, priority: 0.0, state });
        self.events.push(MissionEvent::TaskState { task: id, state });
        self.alloc_dirty = true;
    }

    fn abandon(&mut self, work: WorkKey) {
        if let Some(t) = self.tasks.get_mut(&work) {
            if t.state == TaskState::Pending {
                t.state = TaskState::Abandoned;
                self.events.push(MissionEvent::TaskState { task: t.id, state: TaskState::Abandoned });
            }
        }
    }

    fn round(&self, kind: TaskKind, target: u32) -> u32 {
        self.rounds.get(&(kind, target)).copied().unwrap_or(0)
    }

    fn region_coverage(&self, r: u32) -> f64 {
        let total = self.ctx.regions[r as usize].cells.len();
        self.region_covered[r as usize] as f64 / total as f64
    }

    fn scanned_or_tried(&self, anchor: CellIndex) -> bool {
        self.spec_scanned[anchor] || self.round(TaskKind::EmiScan, anchor as u32) >= MAX_EMI_ROUNDS || self.operator_confirmed.contains(&anchor)
    }

    fn kind_available(&self, kind: TaskKind) -> bool {
        self.robots.values().any(|v| v.alive && kind.eligible(v.kind))
    }

    /// Creates the tasks the current knowledge calls for and retires obsolete ones.
    pub fn refresh_tasks(&mut self) {
        let cfg = &self.ctx.config;
        let overlap = !cfg.strict_phases;
        let gate = cfg.coverage_gate;
        let phase = self.phase;
        let mut wanted = Vec::new();
        for r in 0..self.ctx.regions.len() as u32 {
            let cov = self.region_coverage(r);
            if phase == MissionPhase::Explore {
                let k = self.round(TaskKind::ExploreRegion, r);
                if k > 0 && k < MAX_EXPLORE_ROUNDS && cov < gate {
                    wanted.push((TaskKind::ExploreRegion, r, k));
                }
            }
            if phase < MissionPhase::Confirmation && ((overlap && cov >= gate) || phase >= MissionPhase::SpecialisedDetection) {
                wanted.push((TaskKind::GprSweep, r, 0));
            }
        }
        let emi_open = phase < MissionPhase::Confirmation && (overlap || phase >= MissionPhase::SpecialisedDetection);
        for (&anchor, rec) in &self.candidates {
            if rec.candidate.is_resolved() {
                continue;
            }
            let a = anchor as u32;
            if emi_open && !self.scanned_or_tried(anchor) {
                wanted.push((TaskKind::EmiScan, a, self.round(TaskKind::EmiScan, a)));
            }
            if phase == MissionPhase::Confirmation {
                let k = self.round(TaskKind::ConfirmCandidate, a);
                if k < cfg.max_confirm_rounds {
                    wanted.push((TaskKind::ConfirmCandidate, a, k));
                }
            }
        }
        for id in wanted {
            self.ensure(id);
        }
        let obsolete: Vec<WorkKey> = self
            .tasks
            .values()
            .filter(|t| t.state == TaskState::Pending)
            .filter(|t| {
                let anchor = t.id.target as CellIndex;
                let resolved = || self.candidates.get(&anchor).is_none_or(|c| c.candidate.is_resolved());
                !self.kind_available(t.id.kind)
                    || match t.id.kind {
                        TaskKind::ExploreRegion => phase > MissionPhase::Explore,
                        TaskKind::GprSweep => phase >= MissionPhase::Confirmation,
                        TaskKind::EmiScan => !emi_open || resolved() || self.spec_scanned[anchor],
                        TaskKind::ConfirmCandidate => resolved(),
                    }
            })
            .map(|t| t.id.work())
            .collect();
        for id in obsolete {
            self.abandon(id);
        }
    }

    fn class_prior(&self) -> [f64; 3] {
        self.ctx.profiles.class_prior()
    }

    /// Re-derives candidates from the heatmap and applies the status rules.
    pub fn refresh_candidates(&mut self, tick: u64) {
        if !self.fusion_dirty {
            return;
        }
        self.fusion_dirty = false;
        let cfg = self.ctx.config.clone();
        let prior = self.class_prior();
        for b in find_blobs(&self.heatmap, cfg.candidate_threshold, None) {
            if b.members.iter().any(|m| self.candidates.contains_key(m)) {
                continue;
            }
            let mut cand = Candidate::new(b.cell as u32, b.cell, b.posterior, Some(prior));
            let mut operator = false;
            if self.operator_confirmed.contains(&b.cell) {
                cand.confirm().ok();
                operator = true;
            }
            if self.operator_dismissed.contains(&b.cell) {
                cand.dismiss().ok();
                operator = true;
            }
            self.events.push(candidate_event(&cand));
            self.candidates.insert(b.cell, CandidateRecord { candidate: cand, created_tick: tick, operator });
            self.alloc_dirty = true;
        }
        let anchors: Vec<CellIndex> = self.candidates.iter().filter(|(_, r)| !r.candidate.is_resolved()).map(|(a, _)| *a).collect();
        for anchor in anchors {
            let p = self.heatmap.posterior(anchor);
            let contact = self.contact_scanned[anchor];
            let scanned = self.spec_scanned[anchor] || contact;
            let rounds = self.round(TaskKind::ConfirmCandidate, anchor as u32);
            let ev = self.class_ev.get(&anchor).map_or([0.0; 3], |e| e.map(|v| v as f64 / CLASS_SCALE));
            let rec = self.candidates.get_mut(&anchor).unwrap();
            let c = &mut rec.candidate;
            let before = c.status;
            c.posterior = p;
            c.contact_evidence = contact;
            c.set_class_evidence(prior, ev);
            if c.status == CandidateStatus::Suspected {
                if contact && p >= cfg.confirm_threshold {
                    c.confirm().ok();
                } else if (scanned && p < cfg.dismiss_threshold) || rounds >= cfg.max_confirm_rounds {
                    c.dismiss().ok();
                }
            }
            if c.status == CandidateStatus::Confirmed {
                if contact && p < cfg.dismiss_threshold {
                    c.dismiss().ok();
                } else if !c.try_classify(cfg.classify_threshold) && rounds >= cfg.max_confirm_rounds {
                    c.force_classify().ok();
                }
            }
            if c.status != before {
                rec.operator = false;
                self.events.push(candidate_event(&rec.candidate));
                self.alloc_dirty = true;
            }
        }
    }

    /// Every region is either past the gate or out of explore rounds, and no
    /// explore task is still open.
    fn exploration_exhausted(&self) -> bool {
        let open = self
            .tasks
            .values()
            .any(|t| t.id.kind == TaskKind::ExploreRegion && matches!(t.state, TaskState::Pending | TaskState::Assigned { .. }));
        !open
            && (0..self.ctx.regions.len() as u32).all(|r| {
                let k = self.round(TaskKind::ExploreRegion, r);
                let dead = self.tasks.get(&(TaskKind::ExploreRegion, r, k)).is_some_and(|t| t.state == TaskState::Abandoned);
                self.region_coverage(r) >= self.ctx.config.coverage_gate || k >= MAX_EXPLORE_ROUNDS || dead
            })
    }

    fn gate_ready(&self) -> bool {
        match self.phase {
            MissionPhase::Explore => self.coverage() >= self.ctx.config.coverage_gate || self.exploration_exhausted(),
            MissionPhase::SpecialisedDetection => {
                let sweeps_done = (0..self.ctx.regions.len() as u32).all(|r| {
                    let w = (TaskKind::GprSweep, r, 0);
                    self.done.contains_key(&w) || self.tasks.get(&w).is_some_and(|t| t.state == TaskState::Abandoned)
                });
                sweeps_done && self.candidates.iter().all(|(a, r)| r.candidate.is_resolved() || self.scanned_or_tried(*a))
            }
            MissionPhase::Confirmation => self.candidates.values().all(|r| r.candidate.is_resolved()),
            MissionPhase::Complete => false,
        }
    }

    /// Moves to the next phase when its gate holds (and, when supervised, the
    /// operator has approved). Returns whether the phase changed.
    pub fn advance_phase(&mut self, tick: u64) -> bool {
        let Some(next) = self.phase.next() else {
            return false;
        };
        if !self.gate_ready() {
            return false;
        }
        if self.supervised {
            if self.proposal != Some(next) {
                self.proposal = Some(next);
                self.approved = false;
                self.events.push(MissionEvent::Proposal { to: next });
                return false;
            }
            if !self.approved {
                return false;
            }
        }
        self.proposal = None;
        self.approved = false;
        self.events.push(MissionEvent::Phase { from: self.phase, to: next });
        self.phase = next;
        self.phase_ticks.insert(next, tick);
        self.alloc_dirty = true;
        self.fusion_dirty = true;
        true
    }

    fn priority(&self, task: &Task) -> f64 {
        let w = PriorityWeights { vision: self.ctx.config.w_vision, terrain: self.ctx.config.w_terrain, posterior: self.ctx.config.w_posterior };
        match task.id.kind {
            TaskKind::ExploreRegion | TaskKind::GprSweep => {
                let cells = &self.ctx.regions[task.id.target as usize].cells;
                let n = cells.len() as f64;
                let prior: f64 = cells.iter().map(|c| self.ctx.grid.cell(*c).terrain_prior).sum::<f64>() / n;
                let post: f64 = cells.iter().map(|c| self.heatmap.posterior(*c)).sum::<f64>() / n;
                let hits: u32 = cells.iter().map(|c| self.vision_hits[*c]).sum();
                w.vision * (1.0 + hits as f64).ln() + w.terrain * prior + w.posterior * post
            }
            TaskKind::EmiScan | TaskKind::ConfirmCandidate => {
                let anchor = task.id.target as CellIndex;
                match self.candidates.get(&anchor) {
                    Some(rec) => priority_score(&rec.candidate, self.ctx.grid.cell(anchor), self.vision_hits[anchor], &w),
                    None => 0.0,
                }
            }
        }
    }

    fn spec_for(&self, task: &Task) -> TaskSpec {
        TaskSpec {
            id: task.id,
            waypoints: task.targets.iter().map(|&cell| Waypoint { cell, scan: true }).collect(),
            sensors: task.id.kind.sensors().to_vec(),
        }
    }

    fn assign(&mut self, task: TaskId, robot: RobotId, tick: u64) {
        let spec = {
            let t = self.tasks.get_mut(&task.work()).expect("assigning a known task");
            t.state = TaskState::Assigned { robot, tick };
            let t = &self.tasks[&task.work()];
            self.spec_for(t)
        };
        if let Some(v) = self.robots.get_mut(&robot) {
            v.task = Some(task);
        }
        self.assigned_at.insert(robot, tick);
        self.events.push(MissionEvent::Assign { task, robot });
        self.outbox.push((robot, Msg::Assign(Box::new(spec))));
    }

    /// Greedy allocation of pending tasks to idle robots in `component`.
    pub fn allocate(&mut self, tick: u64, component: &BTreeSet<NodeId>) {
        if *component != self.alloc_component {
            self.alloc_component = component.clone();
            self.component_since = tick;
            self.alloc_dirty = true;
        }
        if !self.alloc_dirty || self.phase == MissionPhase::Complete {
            return;
        }
        let reserve = self.ctx.config.battery_reserve_s;
        let (idle, stale): (Vec<RobotView>, Vec<RobotView>) = self
            .robots
            .values()
            .filter(|v| v.alive && v.task.is_none() && !v.returning && v.battery_s > reserve && component.contains(&v.id))
            .cloned()
            .partition(|v| v.status_tick >= self.component_since || self.assigned_at.get(&v.id).is_some_and(|&a| a >= self.component_since));
        // try again once the silent ones have reported
        self.alloc_dirty = !stale.is_empty();
        if idle.is_empty() {
            return;
        }
        let requests: Vec<AllocationRequest> = self
            .tasks
            .values()
            .filter(|t| t.state == TaskState::Pending && idle.iter().any(|v| t.id.kind.eligible(v.kind)))
            .map(|t| AllocationRequest { task: t.id, priority: self.priority(t), start: t.targets[0] })
            .collect();
        if requests.is_empty() {
            return;
        }
        for (task, robot) in allocate_tasks(&self.ctx.grid, &requests, &idle) {
            self.assign(task, robot, tick);
        }
    }

    /// One controller step for a node acting as brain.
    pub fn step(&mut self, tick: u64, component: &BTreeSet<NodeId>) {
        self.refresh_candidates(tick);
        self.refresh_tasks();
        if self.advance_phase(tick) {
            self.refresh_candidates(tick);
            self.refresh_tasks();
        }
        self.allocate(tick, component);
    }

    /// Records a coverage event if coverage moved since the last one.
    pub fn flush_coverage(&mut self) {
        if self.covered_count != self.logged_coverage {
            self.logged_coverage = self.covered_count;
            self.events.push(MissionEvent::Coverage { covered: self.covered_count, reachable: self.ctx.reachable_count });
        }
    }

    /// Applies an operator command. Pause, resume and abort are the engine's
    /// business and pass through unchanged.
    pub fn apply_command(&mut self, cmd: &OperatorCommand, tick: u64) -> Result<(), MissionError> {
        let bad = |m: String| Err(MissionError::InvalidCommand(m));
        match cmd {
            OperatorCommand::ApprovePhase => {
                if self.proposal.is_none() {
                    return bad("no phase proposal is pending".into());
                }
                self.approved = true;
                Ok(())
            }
            OperatorCommand::Retask { robot, task } => {
                let Some(rid) = self.ctx.resolve_robot(robot) else {
                    return bad(format!("unknown robot `{robot}`"));
                };
                let Ok(tid) = task.parse::<TaskId>() else {
                    return bad(format!("malformed task id `{task}`"));
                };
                let Some(t) = self.tasks.get(&tid.work()) else {
                    return bad(format!("unknown task `{task}`"));
                };
                let tid = t.id;
                if matches!(t.state, TaskState::Done | TaskState::Abandoned) {
                    return bad(format!("task `{task}` is already closed"));
                }
                let view = &self.robots[&rid];
                if !view.alive {
                    return bad(format!("robot `{robot}` has failed"));
                }
                if !tid.kind.eligible(view.kind) {
                    return bad(format!("{} cannot perform {}", view.kind.label(), tid.kind.name()));
                }
                if let Some(other) = t.assigned_robot().filter(|&o| o != rid) {
                    let held = self.robots.get_mut(&other).and_then(|v| v.task.take());
                    self.assigned_at.insert(other, tick);
                    self.outbox.push((other, Msg::Release(held.unwrap_or(tid))));
                }
                if let Some(cur) = self.robots[&rid].task {
                    if cur.work() != tid.work() {
                        self.release(cur.work());
                    }
                }
                self.assign(tid, rid, tick);
                self.alloc_dirty = true;
                Ok(())
            }
            OperatorCommand::ConfirmCandidate { id } => {
                let cell = *id as CellIndex;
                match self.candidates.get_mut(&cell) {
                    Some(rec) if rec.candidate.status == CandidateStatus::Suspected => {
                        rec.candidate.confirm().ok();
                        rec.operator = true;
                        self.operator_confirmed.insert(cell);
                        self.events.push(candidate_event(&rec.candidate));
                        self.fusion_dirty = true;
                        self.alloc_dirty = true;
                        Ok(())
                    }
                    Some(_) => bad(format!("candidate {id} is not suspected")),
                    None => bad(format!("unknown candidate {id}")),
                }
            }
            OperatorCommand::DismissCandidate { id } => {
                let cell = *id as CellIndex;
                match self.candidates.get_mut(&cell) {
                    Some(rec) if !rec.candidate.is_resolved() => {
                        rec.candidate.dismiss().ok();
                        rec.operator = true;
                        self.operator_dismissed.insert(cell);
                        self.events.push(candidate_event(&rec.candidate));
                        self.fusion_dirty = true;
                        self.alloc_dirty = true;
                        Ok(())
                    }
                    Some(_) => bad(format!("candidate {id} is already resolved")),
                    None => bad(format!("unknown candidate {id}")),
                }
            }
            OperatorCommand::Pause | OperatorCommand::Resume | OperatorCommand::Abort => Ok(()),
        }
    }

    /// Candidates dismissed by an operator.
    pub fn operator_dismissals(&self) -> usize {
        self.operator_dismissed.len()
    }
}

fn candidate_event(c: &Candidate) -> MissionEvent {
    MissionEvent::Candidate {
        id: c.id,
        cell: c.cell,
        status: c.status,
        posterior: c.posterior,
        class: (c.status == CandidateStatus::Classified).then(|| c.best_class().0),
    }
}
