//! Mission coordination: phases, task allocation and the two controllers.
//!
//! Both controllers run the same [`Coordinator`]. Under centralized control
//! the command centre coordinates every robot; under MNS control each
//! connected component of the radio graph is coordinated by its smallest-id
//! node, which is the command centre whenever the centre is reachable.

mod agent;
mod config;
mod context;
mod coordinator;
pub(crate) mod metrics;
mod tasks;

pub use agent::RobotAgent;
pub use config::MissionConfig;
pub use context::MissionContext;
pub use coordinator::{CandidateRecord, Coordinator};
pub use metrics::{match_candidates, MessageMetrics, MetricsReport, PhaseTicks, METRICS_SCHEMA_VERSION};
pub use tasks::{allocate_tasks, gap_waypoints, region_waypoints, AllocationRequest, Region};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{RobotId, RobotKind, Waypoint};
use crate::netsim::{NodeId, Payload};
use crate::sensors::{ReadingId, SensorKind, SensorReading};
use crate::world::{CellIndex, ThreatClass};

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionPhase {
    Explore,
    SpecialisedDetection,
    Confirmation,
    Complete,
}

impl MissionPhase {
    pub const ALL: [MissionPhase; 4] =
        [MissionPhase::Explore, MissionPhase::SpecialisedDetection, MissionPhase::Confirmation, MissionPhase::Complete];

    pub fn next(self) -> Option<MissionPhase> {
        match self {
            MissionPhase::Explore => Some(MissionPhase::SpecialisedDetection),
            MissionPhase::SpecialisedDetection => Some(MissionPhase::Confirmation),
            MissionPhase::Confirmation => Some(MissionPhase::Complete),
            MissionPhase::Complete => None,
        }
    }

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            MissionPhase::Explore => "explore",
            MissionPhase::SpecialisedDetection => "specialised_detection",
            MissionPhase::Confirmation => "confirmation",
            MissionPhase::Complete => "complete",
        }
    }
}

impl fmt::Display for MissionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ExploreRegion,
    GprSweep,
    EmiScan,
    ConfirmCandidate,
}

impl TaskKind {
    pub fn eligible(self, robot: RobotKind) -> bool {
        match self {
            TaskKind::ExploreRegion => robot == RobotKind::Suav,
            TaskKind::GprSweep => robot == RobotKind::Luav,
            TaskKind::EmiScan => matches!(robot, RobotKind::Sugv | RobotKind::Lugv),
            TaskKind::ConfirmCandidate => robot == RobotKind::Lugv,
        }
    }

    pub fn sensors(self) -> &'static [SensorKind] {
        match self {
            TaskKind::ExploreRegion => &[SensorKind::Rgb],
            TaskKind::GprSweep => &[SensorKind::Gpr],
            TaskKind::EmiScan => &[SensorKind::Emi],
            TaskKind::ConfirmCandidate => &[SensorKind::Xrb, SensorKind::Raman, SensorKind::Emi],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ExploreRegion => "explore_region",
            TaskKind::GprSweep => "gpr_sweep",
            TaskKind::EmiScan => "emi_scan",
            TaskKind::ConfirmCandidate => "confirm_candidate",
        }
    }

    fn from_name(s: &str) -> Option<TaskKind> {
        [TaskKind::ExploreRegion, TaskKind::GprSweep, TaskKind::EmiScan, TaskKind::ConfirmCandidate].into_iter().find(|k| k.name() == s)
    }
}

/// Deterministic task identity: kind, target (region index or candidate cell) and attempt.
///
/// Written as `kind:target:round`, e.g. `emi_scan:1234:0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub kind: TaskKind,
    pub target: u32,
    pub round: u32,
    /// Node whose coordinator created the task. Brains cut off from each
    /// other may create the same work; the issuer keeps the ids apart.
    pub issuer: NodeId,
}

/// The piece of work a task id names, whoever issued it.
pub type WorkKey = (TaskKind, u32, u32);

impl TaskId {
    pub fn new(kind: TaskKind, target: u32, round: u32, issuer: NodeId) -> TaskId {
        TaskId { kind, target, round, issuer }
    }

    pub fn work(&self) -> WorkKey {
        (self.kind, self.target, self.round)
    }
}

/// `kind:target:round`, with `@issuer` appended unless the centre issued it.
impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind.name(), self.target, self.round)?;
        if self.issuer != 0 {
            write!(f, "@{}", self.issuer)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("task id `{s}` is not kind:target:round[@issuer]");
        let (body, issuer) = match s.split_once('@') {
            Some((b, i)) => (b, i.parse().map_err(|_| bad())?),
            None => (s, 0),
        };
        let parts: Vec<&str> = body.split(':').collect();
        let [kind, target, round] = parts[..] else {
            return Err(bad());
        };
        Ok(TaskId {
            kind: TaskKind::from_name(kind).ok_or_else(bad)?,
            target: target.parse().map_err(|_| bad())?,
            round: round.parse().map_err(|_| bad())?,
            issuer,
        })
    }
}

impl Serialize for TaskId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum TaskState {
    Pending,
    Assigned { robot: RobotId, tick: u64 },
    Done,
    Abandoned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    /// Cells to visit in order; a scan is taken at each.
    pub targets: Vec<CellIndex>,
    pub priority: f64,
    pub state: TaskState,
}

impl Task {
    pub fn assigned_robot(&self) -> Option<RobotId> {
        match self.state {
            TaskState::Assigned { robot, .. } => Some(robot),
            _ => None,
        }
    }
}

/// What a robot is told to do.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub waypoints: Vec<Waypoint>,
    pub sensors: Vec<SensorKind>,
}

/// A coordinator's belief about one robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: RobotId,
    pub kind: RobotKind,
    pub cell: CellIndex,
    pub battery_s: f64,
    pub alive: bool,
    pub task: Option<TaskId>,
    pub returning: bool,
    /// Tick of the newest status applied.
    pub status_tick: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotStatus {
    pub robot: RobotId,
    pub tick: u64,
    pub cell: CellIndex,
    pub battery_s: f64,
    pub task: Option<TaskId>,
    pub returning: bool,
    /// Every task this robot has finished.
    pub done: BTreeSet<TaskId>,
}

/// Knowledge handed to a new coordinator when components merge.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncBundle {
    pub readings: Vec<SensorReading>,
    pub done: BTreeSet<TaskId>,
    pub dismissed: BTreeSet<CellIndex>,
    pub confirmed: BTreeSet<CellIndex>,
}

/// Radio message bodies.
#[derive(Clone, Debug, PartialEq)]
pub enum Msg {
    Readings(Vec<SensorReading>),
    Ack(Vec<ReadingId>),
    Status(Box<RobotStatus>),
    Assign(Box<TaskSpec>),
    /// Stop working on this task; it went to another robot.
    Release(TaskId),
    Sync(Box<SyncBundle>),
}

fn reading_bytes(r: &SensorReading) -> usize {
    24 + r.cells.len() * 9 + r.detection_count() * 32
}

impl Payload for Msg {
    fn kind(&self) -> &'static str {
        match self {
            Msg::Readings(_) => "reading",
            Msg::Ack(_) => "mns_control",
            Msg::Status(_) => "status",
            Msg::Assign(_) | Msg::Release(_) => "task",
            Msg::Sync(_) => "map_delta",
        }
    }

    fn size_bytes(&self) -> usize {
        match self {
            Msg::Readings(rs) => rs.iter().map(reading_bytes).sum(),
            Msg::Ack(ids) => 8 * ids.len(),
            Msg::Status(s) => 48 + 12 * s.done.len(),
            Msg::Assign(t) => 24 + 9 * t.waypoints.len(),
            Msg::Release(_) => 16,
            Msg::Sync(b) => b.readings.iter().map(reading_bytes).sum::<usize>() + 12 * b.done.len() + 8 * (b.dismissed.len() + b.confirmed.len()),
        }
    }
}

/// Commands an operator can issue to the command centre.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cmd")]
pub enum OperatorCommand {
    ApprovePhase,
    Retask { robot: String, task: String },
    ConfirmCandidate { id: u32 },
    DismissCandidate { id: u32 },
    Pause,
    Resume,
    Abort,
}

/// Something a coordinator did that belongs in the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum MissionEvent {
    Assign { task: TaskId, robot: RobotId },
    TaskState { task: TaskId, state: TaskState },
    Phase { from: MissionPhase, to: MissionPhase },
    Proposal { to: MissionPhase },
    Candidate { id: u32, cell: CellIndex, status: crate::fusion::CandidateStatus, posterior: f64, class: Option<ThreatClass> },
    Coverage { covered: u32, reachable: u32 },
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_id_round_trip() {
        let id = TaskId::new(TaskKind::EmiScan, 1234, 2, 0);
        assert_eq!(id.to_string(), "emi_scan:1234:2");
        assert_eq!("emi_scan:1234:2".parse::<TaskId>().unwrap(), id);
        assert!("emi:1".parse::<TaskId>().is_err());
        assert!("emi_scan:1:0@x".parse::<TaskId>().is_err());
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(serde_json::from_str::<TaskId>(&json).unwrap(), id);
        let far = TaskId { issuer: 3, ..id };
        assert_eq!(far.to_string(), "emi_scan:1234:2@3");
        assert_eq!(far.to_string().parse::<TaskId>().unwrap(), far);
        assert_eq!(far.work(), id.work());
    }

    #[test]
    fn eligibility_table() {
        use RobotKind::*;
        assert!(TaskKind::ExploreRegion.eligible(Suav));
        assert!(!TaskKind::ExploreRegion.eligible(Luav));
        assert!(TaskKind::GprSweep.eligible(Luav));
        assert!(!TaskKind::GprSweep.eligible(Sugv));
        assert!(TaskKind::EmiScan.eligible(Sugv) && TaskKind::EmiScan.eligible(Lugv));
        assert!(TaskKind::ConfirmCandidate.eligible(Lugv) && !TaskKind::ConfirmCandidate.eligible(Sugv));
        for t in [TaskKind::ExploreRegion, TaskKind::GprSweep, TaskKind::EmiScan, TaskKind::ConfirmCandidate] {
            for k in RobotKind::ALL {
                if t.eligible(k) {
                    assert!(t.sensors().iter().all(|s| k.loadout().contains(s)));
                }
            }
        }
    }

    #[test]
    fn operator_command_json() {
        let c: OperatorCommand = serde_json::from_str(r#"{"cmd":"dismiss_candidate","id":7}"#).unwrap();
        assert_eq!(c, OperatorCommand::DismissCandidate { id: 7 });
        let c: OperatorCommand = serde_json::from_str(r#"{"cmd":"approve_phase"}"#).unwrap();
        assert_eq!(c, OperatorCommand::ApprovePhase);
    }
}
