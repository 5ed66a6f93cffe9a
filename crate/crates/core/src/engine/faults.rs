use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::fleet::RobotId;
use crate::mission::MissionContext;
use crate::netsim::{NodeId, Outages, Rect, COMMAND_CENTRE};

/// One scheduled fault. Tick ranges are `[start, end)`; a missing `end` lasts forever.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fault {
    RobotFailure {
        robot: String,
        tick: u64,
    },
    CommsBlackout {
        start: u64,
        #[serde(default)]
        end: Option<u64>,
        /// Nodes cut off entirely (`centre` or robot names/ids).
        #[serde(default)]
        nodes: Vec<String>,
        /// Nodes inside this rectangle (meters, `[x0, y0, x1, y1]`) lose all links.
        #[serde(default)]
        region: Option<[f64; 4]>,
        #[serde(default)]
        links: Vec<[String; 2]>,
    },
    JammingSpike {
        p_loss: f64,
        start: u64,
        #[serde(default)]
        end: Option<u64>,
    },
}

/// A fault file: a list of `[[fault]]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSchedule {
    #[serde(default, rename = "fault")]
    pub faults: Vec<Fault>,
}

impl FaultSchedule {
    pub fn parse(text: &str) -> Result<FaultSchedule, EngineError> {
        toml::from_str(text).map_err(|e| EngineError::InvalidSchedule(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FaultSchedule, EngineError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| EngineError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("fault schedule serializes")
    }

    pub fn push(mut self, f: Fault) -> FaultSchedule {
        self.faults.push(f);
        self
    }

    /// Resolves names and checks the schedule for contradictions.
    pub fn resolve(&self, ctx: &MissionContext) -> Result<ResolvedFaults, EngineError> {
        let bad = |m: String| Err(EngineError::InvalidSchedule(m));
        let node = |key: &str| -> Result<NodeId, EngineError> {
            if ["centre", "center", "0"].iter().any(|k| k.eq_ignore_ascii_case(key)) {
                return Ok(COMMAND_CENTRE);
            }
            ctx.resolve_robot(key).ok_or_else(|| EngineError::InvalidSchedule(format!("unknown node `{key}`")))
        };
        let mut out = ResolvedFaults::default();
        let mut fail_tick: BTreeMap<RobotId, u64> = BTreeMap::new();
        for f in &self.faults {
            match f {
                Fault::RobotFailure { robot, tick } => {
                    let Some(id) = ctx.resolve_robot(robot) else {
                        return bad(format!("unknown robot `{robot}`"));
                    };
                    if let Some(prev) = fail_tick.insert(id, *tick) {
                        if prev != *tick {
                            return bad(format!("robot `{robot}` is scheduled to fail at ticks {prev} and {tick}"));
                        }
                        continue;
                    }
                    out.failures.entry(*tick).or_default().push(id);
                }
                Fault::CommsBlackout { start, end, nodes, region, links } => {
                    if end.is_some_and(|e| e <= *start) {
                        return bad(format!("blackout ends ({}) before it starts ({start})", end.unwrap()));
                    }
                    if nodes.is_empty() && region.is_none() && links.is_empty() {
                        return bad("blackout names no nodes, region or links".into());
                    }
                    let mut b = Blackout { start: *start, end: *end, ..Default::default() };
                    for n in nodes {
                        b.nodes.insert(node(n)?);
                    }
                    if let Some(r) = region {
                        if !(r[0] <= r[2] && r[1] <= r[3]) || r.iter().any(|v| !v.is_finite()) {
                            return bad(format!("blackout region {r:?} is not [x0, y0, x1, y1] with x0 <= x1, y0 <= y1"));
                        }
                        b.region = Some(Rect(*r));
                    }
                    for [a, c] in links {
                        let (a, c) = (node(a)?, node(c)?);
                        if a == c {
                            return bad(format!("link from node {a} to itself"));
                        }
                        b.links.insert((a.min(c), a.max(c)));
                    }
                    out.blackouts.push(b);
                }
                Fault::JammingSpike { p_loss, start, end } => {
                    if !(0.0..=1.0).contains(p_loss) {
                        return bad(format!("jamming p_loss {p_loss} outside [0,1]"));
                    }
                    if end.is_some_and(|e| e <= *start) {
                        return bad(format!("jamming spike ends ({}) before it starts ({start})", end.unwrap()));
                    }
                    for j in &out.jams {
                        let overlap = j.start < end.unwrap_or(u64::MAX) && *start < j.end.unwrap_or(u64::MAX);
                        if overlap && j.p_loss != *p_loss {
                            return bad(format!("overlapping jamming spikes with p_loss {} and {p_loss}", j.p_loss));
                        }
                    }
                    out.jams.push(Jam { p_loss: *p_loss, start: *start, end: *end });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Blackout {
    pub start: u64,
    pub end: Option<u64>,
    pub nodes: BTreeSet<NodeId>,
    pub region: Option<Rect>,
    pub links: BTreeSet<(NodeId, NodeId)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jam {
    pub p_loss: f64,
    pub start: u64,
    pub end: Option<u64>,
}

fn active(start: u64, end: Option<u64>, tick: u64) -> bool {
    tick >= start && end.is_none_or(|e| tick < e)
}

/// A validated schedule with ids in place of names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResolvedFaults {
    pub failures: BTreeMap<u64, Vec<RobotId>>,
    pub blackouts: Vec<Blackout>,
    pub jams: Vec<Jam>,
}

impl ResolvedFaults {
    pub fn outages_at(&self, tick: u64) -> Outages {
        let mut o = Outages::default();
        for b in self.blackouts.iter().filter(|b| active(b.start, b.end, tick)) {
            o.isolated.extend(b.nodes.iter().copied());
            o.regions.extend(b.region);
            o.links.extend(b.links.iter().copied());
        }
        o
    }

    pub fn jamming_at(&self, tick: u64) -> Option<f64> {
        self.jams.iter().find(|j| active(j.start, j.end, tick)).map(|j| j.p_loss)
    }

    /// Ticks at which something switches on or off, for the event log.
    pub fn edges_at(&self, tick: u64) -> Vec<String> {
        let mut out = Vec::new();
        for b in &self.blackouts {
            if b.start == tick {
                out.push("comms_blackout_start".to_string());
            }
            if b.end == Some(tick) {
                out.push("comms_blackout_end".to_string());
            }
        }
        for j in &self.jams {
            if j.start == tick {
                out.push(format!("jamming_spike_start p_loss={}", j.p_loss));
            }
            if j.end == Some(tick) {
                out.push("jamming_spike_end".to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_scenario, ScenarioParams};

    fn ctx() -> MissionContext {
        let s = generate_scenario(&ScenarioParams::sized(20, 20, 2), 1).unwrap();
        MissionContext::new(&s).unwrap()
    }

    #[test]
    fn parses_toml() {
        let text = r#"
[[fault]]
kind = "robot_failure"
robot = "SUGV-1"
tick = 50

[[fault]]
kind = "comms_blackout"
start = 100
nodes = ["centre"]

[[fault]]
kind = "jamming_spike"
p_loss = 0.5
start = 10
end = 20
"#;
        let s = FaultSchedule::parse(text).unwrap();
        assert_eq!(s.faults.len(), 3);
        let r = s.resolve(&ctx()).unwrap();
        assert_eq!(r.failures[&50], vec![4]);
        assert!(r.outages_at(99).is_empty());
        assert!(r.outages_at(5000).isolated.contains(&0));
        assert_eq!(r.jamming_at(15), Some(0.5));
        assert_eq!(r.jamming_at(20), None);
        let again = FaultSchedule::parse(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn contradictions_are_rejected() {
        let c = ctx();
        let two_deaths = FaultSchedule::default()
            .push(Fault::RobotFailure { robot: "SUGV-1".into(), tick: 5 })
            .push(Fault::RobotFailure { robot: "4".into(), tick: 9 });
        assert!(matches!(two_deaths.resolve(&c), Err(EngineError::InvalidSchedule(_))));
        let same = FaultSchedule::default()
            .push(Fault::RobotFailure { robot: "SUGV-1".into(), tick: 5 })
            .push(Fault::RobotFailure { robot: "4".into(), tick: 5 });
        assert_eq!(same.resolve(&c).unwrap().failures[&5], vec![4]);
        let jams = FaultSchedule::default()
            .push(Fault::JammingSpike { p_loss: 0.3, start: 0, end: Some(10) })
            .push(Fault::JammingSpike { p_loss: 0.6, start: 5, end: None });
        assert!(jams.resolve(&c).is_err());
        let backwards = FaultSchedule::default().push(Fault::JammingSpike { p_loss: 0.3, start: 10, end: Some(10) });
        assert!(backwards.resolve(&c).is_err());
        let ghost = FaultSchedule::default().push(Fault::RobotFailure { robot: "SUAV-9".into(), tick: 1 });
        assert!(ghost.resolve(&c).is_err());
        let empty = FaultSchedule::default().push(Fault::CommsBlackout { start: 0, end: None, nodes: vec![], region: None, links: vec![] });
        assert!(empty.resolve(&c).is_err());
        assert!(FaultSchedule::parse("[[fault]]\nkind = \"meteor\"\n").is_err());
    }
}
