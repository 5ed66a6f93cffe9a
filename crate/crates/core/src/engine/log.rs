use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::fleet::RobotId;
use crate::fusion::CandidateStatus;
use crate::mission::{MissionPhase, OperatorCommand, TaskId, TaskState};
use crate::netsim::NodeId;
use crate::world::{CellIndex, ThreatClass};

pub const LOG_FORMAT: &str = "aidedex-events";
pub const LOG_VERSION: u32 = 1;

/// Rounds to 1e-9 so logs compare byte for byte across platforms.
pub fn r9(x: f64) -> f64 {
    let y = (x * 1e9).round() / 1e9;
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatTruth {
    pub id: u32,
    pub cell: CellIndex,
    pub class: ThreatClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotEntry {
    pub id: RobotId,
    pub name: String,
}

/// First line of every log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub mode: String,
    pub seed: u64,
    pub supervised: bool,
    pub max_ticks: u64,
    pub width: u32,
    pub height: u32,
    pub reachable: u32,
    pub robots: Vec<RobotEntry>,
    pub threats: Vec<ThreatTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSnap {
    pub id: RobotId,
    pub x: f64,
    pub y: f64,
    pub battery_s: f64,
    pub alive: bool,
    pub task: Option<TaskId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordBody {
    Snapshot { robots: Vec<RobotSnap> },
    Assign { task: TaskId, robot: RobotId },
    Task { task: TaskId, state: TaskState },
    Phase { from: MissionPhase, to: MissionPhase },
    Proposal { to: MissionPhase },
    Candidate { id: u32, cell: CellIndex, status: CandidateStatus, posterior: f64, class: Option<ThreatClass> },
    Coverage { covered: u32, reachable: u32 },
    Net { sent: u64, delivered: u64, lost: u64, expired: u64, node_down: u64 },
    Partition { epoch: u64, members: Vec<NodeId> },
    Fault { what: String },
    RobotFailed { robot: RobotId },
    Operator { command: OperatorCommand, accepted: bool, error: Option<String> },
    End { outcome: String, heatmap_sha256: String },
}

/// One timestamped event. `node` is the node the event happened at (the
/// coordinator for mission events).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub node: NodeId,
    #[serde(flatten)]
    pub body: RecordBody,
}

/// Line-delimited JSON event log: a header line, then one record per line.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl EventLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the serialized log, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<(), EngineError> {
        std::fs::write(path.as_ref(), self.to_jsonl()).map_err(|e| EngineError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    /// Parses a log, rejecting foreign formats, other versions and truncated files.
    pub fn parse(text: &str) -> Result<EventLog, EngineError> {
        let bad = |m: String| EngineError::IncompatibleLog(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| bad("empty log".into()))?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != LOG_FORMAT {
            return Err(bad(format!("format `{}` is not {LOG_FORMAT}", header.format)));
        }
        if header.version != LOG_VERSION {
            return Err(bad(format!("log version {} (this build reads {LOG_VERSION})", header.version)));
        }
        let mut records = Vec::new();
        for (i, l) in lines.enumerate() {
            let r: LogRecord = serde_json::from_str(l).map_err(|e| bad(format!("record {}: {e}", i + 1)))?;
            records.push(r);
        }
        if !matches!(records.last(), Some(LogRecord { body: RecordBody::End { .. }, .. })) {
            return Err(bad("log is truncated (no end record)".into()));
        }
        Ok(EventLog { header, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EventLog, EngineError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| EngineError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// `(coordinator, task, robot)` for every assignment, in order.
    pub fn assignments(&self) -> Vec<(NodeId, TaskId, RobotId)> {
        self.records
            .iter()
            .filter_map(|r| match r.body {
                RecordBody::Assign { task, robot } => Some((r.node, task, robot)),
                _ => None,
            })
            .collect()
    }
}
