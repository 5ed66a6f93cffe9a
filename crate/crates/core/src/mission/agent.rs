use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;

use super::{MissionContext, Msg, RobotStatus, TaskId, TaskSpec};
use crate::fleet::{plan_path, Pose, RobotId, RobotState, Route, ScanAction, Waypoint};
use crate::netsim::NodeId;
use crate::sensors::{ReadingId, ScanTarget, SensorReading};
use crate::world::CellIndex;

/// Ticks between unsolicited status reports.
pub const STATUS_PERIOD: u64 = 5;

#[derive(Clone, Debug)]
struct ActiveTask {
    spec: TaskSpec,
    /// Waiting at a scan point for the arm to deploy.
    dwell: Option<CellIndex>,
}

/// Robot-side protocol: executes assignments, keeps every reading it took
/// until its coordinator acknowledges it, and reports status.
#[derive(Clone, Debug)]
pub struct RobotAgent {
    pub id: RobotId,
    ctx: Arc<MissionContext>,
    store: BTreeMap<ReadingId, SensorReading>,
    unacked: BTreeSet<ReadingId>,
    coordinator: Option<NodeId>,
    reachable: bool,
    resend_due: bool,
    last_send: u64,
    active: Option<ActiveTask>,
    route: Route,
    done: BTreeSet<TaskId>,
    returning: bool,
    in_contact: bool,
    last_contact: u64,
    idle_since: u64,
    status_due: bool,
    last_status: Option<u64>,
    fresh: Vec<ReadingId>,
    outbox: Vec<(NodeId, Msg)>,
}

impl RobotAgent {
    pub fn new(id: RobotId, ctx: Arc<MissionContext>) -> RobotAgent {
        RobotAgent {
            id,
            ctx,
            store: BTreeMap::new(),
            unacked: BTreeSet::new(),
            coordinator: None,
            reachable: false,
            resend_due: false,
            last_send: 0,
            active: None,
            route: Route::default(),
            done: BTreeSet::new(),
            returning: false,
            in_contact: false,
            last_contact: 0,
            idle_since: 0,
            status_due: true,
            last_status: None,
            fresh: Vec::new(),
            outbox: Vec::new(),
        }
    }

    pub fn coordinator(&self) -> Option<NodeId> {
        self.coordinator
    }

    pub fn current_task(&self) -> Option<TaskId> {
        self.active.as_ref().map(|a| a.spec.id)
    }

    pub fn is_returning(&self) -> bool {
        self.returning
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn done_tasks(&self) -> &BTreeSet<TaskId> {
        &self.done
    }

    pub fn readings_taken(&self) -> usize {
        self.store.len()
    }

    pub fn unacked(&self) -> usize {
        self.unacked.len()
    }

    pub fn take_outbox(&mut self) -> Vec<(NodeId, Msg)> {
        std::mem::take(&mut self.outbox)
    }

    /// Tells the agent who coordinates it now, whether a route to them exists
    /// and whether it shares a component with the command centre.
    ///
    /// A new coordinator gets every reading again; dedup on their side turns
    /// that into a union of knowledge.
    pub fn set_coordinator(&mut self, brain: NodeId, reachable: bool, anchored: bool, tick: u64) {
        if self.coordinator != Some(brain) {
            self.coordinator = Some(brain);
            self.unacked = self.store.keys().copied().collect();
            self.resend_due = true;
            self.status_due = true;
        } else if reachable && !self.reachable {
            self.resend_due = true;
            self.status_due = true;
        }
        self.reachable = reachable;
        self.in_contact = anchored || (reachable && brain != self.id);
        if self.in_contact {
            self.last_contact = tick;
        }
    }

    pub fn handle(&mut self, src: NodeId, msg: &Msg, robot: &RobotState) {
        if Some(src) != self.coordinator {
            return;
        }
        match msg {
            Msg::Ack(ids) => {
                for id in ids {
                    self.unacked.remove(id);
                }
            }
            Msg::Assign(spec) => self.accept(spec, robot),
            Msg::Release(id)
                if self.current_task() == Some(*id) => {
                    self.active = None;
                    self.route = Route::default();
                    self.status_due = true;
                }
            _ => {}
        }
    }

    fn accept(&mut self, spec: &TaskSpec, robot: &RobotState) {
        if self.returning || !robot.is_alive() {
            self.status_due = true;
            return;
        }
        let grid = &self.ctx.grid;
        let mut cur = robot.cell(grid);
        let mut wps = Vec::new();
        for wp in &spec.waypoints {
            let Ok(path) = plan_path(grid, cur, wp.cell, robot.kind) else {
                continue;
            };
            for &c in &path[1..] {
                wps.push(Waypoint { cell: c, scan: false });
            }
            if path.len() == 1 {
                wps.push(Waypoint { cell: wp.cell, scan: wp.scan });
            } else if let Some(last) = wps.last_mut() {
                last.scan = wp.scan;
            }
            cur = wp.cell;
        }
        self.status_due = true;
        if wps.is_empty() {
            self.done.insert(spec.id);
            self.active = None;
            self.route = Route::default();
            return;
        }
        self.route = Route::new(wps);
        self.active = Some(ActiveTask { spec: spec.clone(), dwell: None });
    }

    fn seconds_home(&self, robot: &RobotState) -> f64 {
        let steps = self.ctx.home_distance(robot.kind, robot.cell(&self.ctx.grid)).unwrap_or(0) as f64;
        steps * self.ctx.grid.cell_size() * std::f64::consts::SQRT_2 / robot.speed.max(1e-9)
    }

    fn go_home(&mut self, robot: &RobotState) {
        let grid = &self.ctx.grid;
        self.route = match plan_path(grid, robot.cell(grid), self.ctx.deploy, robot.kind) {
            Ok(path) => Route::new(path.into_iter().skip(1).map(|cell| Waypoint { cell, scan: false }).collect()),
            Err(_) => Route::default(),
        };
    }

    /// Battery and connectivity housekeeping, run before motion.
    pub fn control(&mut self, robot: &mut RobotState, tick: u64) {
        if !robot.is_alive() {
            return;
        }
        let cfg = &self.ctx.config;
        let at_home = robot.cell(&self.ctx.grid) == self.ctx.deploy;
        if at_home {
            robot.recharge();
            if self.returning && self.route.is_done() {
                self.returning = false;
                self.status_due = true;
            }
        }
        if !self.returning && !at_home && robot.battery_s < self.seconds_home(robot) + cfg.battery_reserve_s + cfg.dt {
            self.active = None;
            self.returning = true;
            self.status_due = true;
            self.go_home(robot);
            return;
        }
        if self.active.is_some() {
            self.idle_since = tick;
        }
        let idle = self.active.is_none() && self.route.is_done();
        // a robot coordinating itself gives its own allocator a chance first
        let since = if self.coordinator == Some(self.id) { self.last_contact.max(self.idle_since) } else { self.last_contact };
        if idle && !self.returning && !at_home && !self.in_contact && tick.saturating_sub(since) > cfg.rejoin_after {
            self.go_home(robot);
        }
    }

    /// Moves along the route for one tick; returns the scan points reached.
    pub fn motion(&mut self, robot: &mut RobotState, dt: f64) -> Vec<Waypoint> {
        if !robot.is_alive() {
            return Vec::new();
        }
        let before = robot.battery_s;
        let reached = robot.step_motion(&mut self.route, &self.ctx.grid, dt);
        let spent = before - robot.battery_s;
        if robot.cell(&self.ctx.grid) != self.ctx.deploy {
            robot.drain((dt - spent).max(0.0));
        }
        if let Some(a) = self.active.as_ref() {
            if a.dwell.is_some() {
                robot.advance_arm(dt);
            }
        }
        reached.into_iter().filter(|w| w.scan).collect()
    }

    /// Fires the task's sensors at each reached scan point (and at a dwell point
    /// once the arm is ready), then reports the readings.
    pub fn scan<R: Rng + ?Sized>(&mut self, robot: &mut RobotState, reached: &[Waypoint], target: ScanTarget<'_>, rng: &mut R, tick: u64) {
        let Some(active) = self.active.as_mut() else {
            return;
        };
        let action = ScanAction { sensors: active.spec.sensors.clone() };
        let mut points: Vec<CellIndex> = active.dwell.into_iter().collect();
        points.extend(reached.iter().map(|w| w.cell));
        let resting = robot.pose;
        for cell in points {
            robot.pose = Pose::at_cell(&self.ctx.grid, cell);
            let out = robot.execute_scan_action(&action, &self.ctx.fleet, target, rng, tick).unwrap_or_default();
            active.dwell = if out.is_empty() && action.sensors.iter().any(|s| s.is_contact()) { Some(cell) } else { None };
            for r in out {
                self.fresh.push(r.id);
                self.unacked.insert(r.id);
                self.store.insert(r.id, r);
            }
        }
        robot.pose = resting;
        if active.dwell.is_none() && self.route.is_done() {
            self.done.insert(active.spec.id);
            self.active = None;
            self.status_due = true;
        }
    }

    fn status(&self, robot: &RobotState, tick: u64) -> RobotStatus {
        RobotStatus {
            robot: self.id,
            tick,
            cell: robot.cell(&self.ctx.grid),
            battery_s: robot.battery_s,
            task: self.current_task(),
            returning: self.returning,
            done: self.done.clone(),
        }
    }

    /// Queues readings and status for the coordinator. Messages to a
    /// coordinator that is this robot itself are emitted with `dst == self.id`
    /// and count as delivered.
    pub fn flush(&mut self, robot: &RobotState, tick: u64) {
        let Some(coord) = self.coordinator else {
            return;
        };
        if !robot.is_alive() {
            return;
        }
        let local = coord == self.id;
        if local || self.reachable {
            let timeout = tick.saturating_sub(self.last_send) >= self.ctx.config.ack_timeout;
            let ids: Vec<ReadingId> = if self.resend_due || (timeout && !self.unacked.is_empty()) {
                self.unacked.iter().copied().collect()
            } else {
                self.fresh.iter().copied().filter(|id| self.unacked.contains(id)).collect()
            };
            if !ids.is_empty() {
                let batch = ids.iter().map(|id| self.store[id].clone()).collect();
                self.outbox.push((coord, Msg::Readings(batch)));
                self.last_send = tick;
                if local {
                    self.unacked.clear();
                }
            }
            self.resend_due = false;
            let periodic = self.last_status.is_none_or(|t| tick >= t + STATUS_PERIOD);
            if self.status_due || periodic {
                self.outbox.push((coord, Msg::Status(Box::new(self.status(robot, tick)))));
                self.status_due = false;
                self.last_status = Some(tick);
            }
        }
        self.fresh.clear();
    }
}
