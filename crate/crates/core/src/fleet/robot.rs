use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FleetConfig, FleetError, RobotId, RobotKind};
use crate::sensors::{scan, ReadingId, ScanTarget, SensorKind, SensorReading};
use crate::world::{CellIndex, WorldGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

impl Pose {
    pub fn at_cell(grid: &WorldGrid, cell: CellIndex) -> Pose {
        let (x, y) = grid.center(cell);
        Pose { x, y }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Ok,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum ArmState {
    Stowed,
    Deploying { remaining_s: f64 },
    Deployed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: CellIndex,
    /// Scan on arrival.
    pub scan: bool,
}

/// Waypoints still to visit, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub waypoints: Vec<Waypoint>,
    pub next: usize,
}

impl Route {
    pub fn new(waypoints: Vec<Waypoint>) -> Route {
        Route { waypoints, next: 0 }
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    pub fn remaining(&self) -> &[Waypoint] {
        &self.waypoints[self.next.min(self.waypoints.len())..]
    }
}

/// Sensors to fire at the current pose.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanAction {
    pub sensors: Vec<SensorKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: RobotId,
    pub name: String,
    pub kind: RobotKind,
    pub pose: Pose,
    pub speed: f64,
    pub battery_s: f64,
    pub battery_capacity_s: f64,
    pub health: Health,
    pub arm: Option<ArmState>,
    pub next_seq: u32,
}

impl RobotState {
    pub fn new(id: RobotId, kind: RobotKind, index: u32, pose: Pose, config: &FleetConfig) -> RobotState {
        let k = config.kind(kind);
        RobotState {
            id,
            name: format!("{}-{}", kind.label(), index),
            kind,
            pose,
            speed: k.speed,
            battery_s: k.battery_s,
            battery_capacity_s: k.battery_s,
            health: Health::Ok,
            arm: kind.has_arm().then_some(ArmState::Stowed),
            next_seq: 0,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.health == Health::Ok
    }

    /// Alive with charge left.
    pub fn can_move(&self) -> bool {
        self.is_alive() && self.battery_s > 0.0
    }

    pub fn has_sensor(&self, kind: SensorKind) -> bool {
        self.kind.loadout().contains(&kind)
    }

    pub fn cell(&self, grid: &WorldGrid) -> CellIndex {
        grid.cell_at(self.pose.x, self.pose.y).expect("robot pose is inside the grid")
    }

    /// Advances along `route` for `dt` seconds and returns the waypoints reached, in order.
    ///
    /// Battery drains by the time actually spent; with less charge than `dt`
    /// the robot covers only what the remaining charge allows and then halts.
    pub fn step_motion(&mut self, route: &mut Route, grid: &WorldGrid, dt: f64) -> Vec<Waypoint> {
        let mut reached = Vec::new();
        if !self.can_move() || route.is_done() {
            return reached;
        }
        let usable = dt.min(self.battery_s);
        let mut budget = self.speed * usable;
        let mut moved = false;
        while let Some(wp) = route.waypoints.get(route.next).copied() {
            let target = Pose::at_cell(grid, wp.cell);
            let d = self.pose.distance(&target);
            if d <= budget + 1e-12 {
                budget -= d;
                moved |= d > 0.0;
                self.pose = target;
                route.next += 1;
                reached.push(wp);
            } else {
                let f = budget / d;
                self.pose.x += (target.x - self.pose.x) * f;
                self.pose.y += (target.y - self.pose.y) * f;
                moved = true;
                break;
            }
        }
        let spent = if route.is_done() && self.speed > 0.0 {
            // time actually used to finish the route
            usable - budget / self.speed
        } else {
            usable
        };
        self.battery_s = (self.battery_s - spent).max(0.0);
        if moved {
            if let Some(arm) = self.arm.as_mut() {
                *arm = ArmState::Stowed;
            }
        }
        reached
    }

    /// Battery drain while holding position.
    pub fn drain(&mut self, dt: f64) {
        if self.is_alive() {
            self.battery_s = (self.battery_s - dt).max(0.0);
        }
    }

    pub fn recharge(&mut self) {
        if self.is_alive() {
            self.battery_s = self.battery_capacity_s;
        }
    }

    /// Progresses an arm deployment by `dt` seconds.
    pub fn advance_arm(&mut self, dt: f64) {
        if let Some(ArmState::Deploying { remaining_s }) = self.arm {
            let left = remaining_s - dt;
            self.arm = Some(if left <= 1e-9 { ArmState::Deployed } else { ArmState::Deploying { remaining_s: left } });
        }
    }

    pub fn arm_ready(&self) -> bool {
        matches!(self.arm, None | Some(ArmState::Deployed))
    }

    /// Fires the requested sensors at the current pose.
    ///
    /// Contact sensors on an armed robot need the arm deployed; until the dwell
    /// has elapsed the call starts or continues deployment and returns no readings.
    pub fn execute_scan_action<R: Rng + ?Sized>(
        &mut self,
        action: &ScanAction,
        config: &FleetConfig,
        target: ScanTarget<'_>,
        rng: &mut R,
        tick: u64,
    ) -> Result<Vec<SensorReading>, FleetError> {
        for &s in &action.sensors {
            if !self.has_sensor(s) || config.sensors.get(s).is_none() {
                return Err(FleetError::SensorUnavailable { robot: self.name.clone(), sensor: s });
            }
        }
        if !self.is_alive() {
            return Ok(Vec::new());
        }
        if action.sensors.iter().any(|s| s.is_contact()) && !self.arm_ready() {
            if self.arm == Some(ArmState::Stowed) {
                self.arm = Some(if config.arm_dwell_s > 0.0 {
                    ArmState::Deploying { remaining_s: config.arm_dwell_s }
                } else {
                    ArmState::Deployed
                });
            }
            if !self.arm_ready() {
                return Ok(Vec::new());
            }
        }
        let mut out = Vec::with_capacity(action.sensors.len());
        for &s in &action.sensors {
            let model = config.sensors.get(s).expect("checked above");
            let id = ReadingId { robot: self.id, seq: self.next_seq };
            self.next_seq += 1;
            out.push(scan(model, (self.pose.x, self.pose.y), &config.localization, target, rng, id, tick));
        }
        Ok(out)
    }
}

/// The robots of one scenario, ordered by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub robots: Vec<RobotState>,
}

impl Fleet {
    pub fn get(&self, id: RobotId) -> Option<&RobotState> {
        self.robots.iter().find(|r| r.id == id)
    }

    pub fn get_mut(&mut self, id: RobotId) -> Option<&mut RobotState> {
        self.robots.iter_mut().find(|r| r.id == id)
    }

    /// Resolves a robot by numeric id or name (`"SUGV-2"`, case-insensitive).
    pub fn resolve(&self, key: &str) -> Result<RobotId, FleetError> {
        if let Ok(id) = key.parse::<RobotId>() {
            if self.get(id).is_some() {
                return Ok(id);
            }
        }
        self.robots
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(key))
            .map(|r| r.id)
            .ok_or_else(|| FleetError::UnknownRobot(key.to_string()))
    }

    /// Marks a robot failed. Returns whether this call changed anything.
    pub fn fail_robot(&mut self, id: RobotId) -> Result<bool, FleetError> {
        let r = self.get_mut(id).ok_or_else(|| FleetError::UnknownRobot(id.to_string()))?;
        if r.health == Health::Failed {
            return Ok(false);
        }
        r.health = Health::Failed;
        Ok(true)
    }

    pub fn alive(&self) -> impl Iterator<Item = &RobotState> {
        self.robots.iter().filter(|r| r.is_alive())
    }
}

/// Builds the configured fleet at the deployment zone. Ids start at 1 in
/// SUAV, LUAV, SUGV, LUGV order (id 0 is the command centre).
pub fn default_fleet(config: &FleetConfig, grid: &WorldGrid) -> Fleet {
    let [dx, dy] = config.deploy_cell;
    let deploy = grid.index_of(dx as i64, dy as i64).expect("deploy cell inside the grid");
    let pose = Pose::at_cell(grid, deploy);
    let mut robots = Vec::new();
    let mut id = 1;
    for kind in RobotKind::ALL {
        for i in 1..=config.kind(kind).count {
            robots.push(RobotState::new(id, kind, i, pose, config));
            id += 1;
        }
    }
    Fleet { robots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{rng_stream, StreamPurpose};
    use crate::world::Terrain;

    fn grid() -> WorldGrid {
        WorldGrid::uniform(10, 10, Terrain::Gravel).unwrap()
    }

    fn fleet() -> Fleet {
        default_fleet(&FleetConfig::default(), &grid())
    }

    #[test]
    fn default_composition() {
        let f = fleet();
        let names: Vec<_> = f.robots.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["SUAV-1", "SUAV-2", "LUAV-1", "SUGV-1", "SUGV-2", "LUGV-1"]);
        assert_eq!(f.get(4).unwrap().battery_s, 5.0 * 3600.0);
        assert_eq!(f.get(6).unwrap().battery_s, 12.0 * 3600.0);
        assert_eq!(f.resolve("sugv-2").unwrap(), 5);
        assert!(f.resolve("SUGV-9").is_err());
    }

    #[test]
    fn empty_battery_does_not_move() {
        let g = grid();
        let mut r = fleet().get(4).unwrap().clone();
        r.battery_s = 0.0;
        let before = r.pose;
        let mut route = Route::new(vec![Waypoint { cell: 15, scan: false }]);
        assert!(r.step_motion(&mut route, &g, 1.0).is_empty());
        assert_eq!(r.pose, before);
    }

    #[test]
    fn partial_charge_limits_motion() {
        let g = grid();
        let mut r = fleet().get(4).unwrap().clone(); // 1.5 m/s at (1.5, 1.5)
        r.battery_s = 5.0;
        let mut route = Route::new(vec![Waypoint { cell: 19, scan: false }]); // (9.5, 1.5)
        r.step_motion(&mut route, &g, 10.0);
        assert_eq!(r.battery_s, 0.0);
        assert!((r.pose.x - 9.0).abs() < 1e-12);
        assert!(!r.can_move());
    }

    #[test]
    fn reaching_waypoints_spends_only_needed_time() {
        let g = grid();
        let mut r = fleet().get(1).unwrap().clone(); // 10 m/s
        let full = r.battery_s;
        let mut route = Route::new(vec![Waypoint { cell: 12, scan: true }, Waypoint { cell: 13, scan: true }]);
        let hit = r.step_motion(&mut route, &g, 1.0);
        assert_eq!(hit.len(), 2);
        assert!(route.is_done());
        assert!((full - r.battery_s - 0.2).abs() < 1e-9);
    }

    #[test]
    fn failure_is_idempotent() {
        let mut f = fleet();
        assert!(f.fail_robot(5).unwrap());
        let snap = f.clone();
        assert!(!f.fail_robot(5).unwrap());
        assert_eq!(f, snap);
        assert!(matches!(f.fail_robot(42), Err(FleetError::UnknownRobot(_))));
    }

    #[test]
    fn sensor_availability_and_arm_dwell() {
        let g = grid();
        let cfg = FleetConfig::default();
        let mut f = fleet();
        let threat_at = vec![None; g.len()];
        let target = ScanTarget { grid: &g, threats: &[], threat_at: &threat_at };
        let mut rng = rng_stream(1, 1, StreamPurpose::Scan);
        let sugv = f.get_mut(4).unwrap();
        let err = sugv.execute_scan_action(&ScanAction { sensors: vec![SensorKind::Gpr] }, &cfg, target, &mut rng, 0);
        assert!(matches!(err, Err(FleetError::SensorUnavailable { sensor: SensorKind::Gpr, .. })));

        let lugv = f.get_mut(6).unwrap();
        let xrb = ScanAction { sensors: vec![SensorKind::Xrb] };
        assert!(lugv.execute_scan_action(&xrb, &cfg, target, &mut rng, 0).unwrap().is_empty());
        lugv.advance_arm(30.0);
        assert!(lugv.execute_scan_action(&xrb, &cfg, target, &mut rng, 30).unwrap().is_empty());
        lugv.advance_arm(30.0);
        let rs = lugv.execute_scan_action(&xrb, &cfg, target, &mut rng, 60).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].kind, SensorKind::Xrb);
        // EMI needs no arm
        let emi = ScanAction { sensors: vec![SensorKind::Emi] };
        let mut r = fleet().get(6).unwrap().clone();
        assert_eq!(r.execute_scan_action(&emi, &cfg, target, &mut rng, 0).unwrap().len(), 1);
    }
}
