use std::collections::BTreeMap;

use super::log::{EventLog, RecordBody};
use super::sim::{build_report, SAMPLE_EVERY};
use super::EngineError;
use crate::fusion::CandidateStatus;
use crate::mission::metrics::score;
use crate::mission::{MessageMetrics, MetricsReport, MissionPhase, OperatorCommand, PhaseTicks};
use crate::netsim::{NodeId, COMMAND_CENTRE};
use crate::world::{CellIndex, Terrain, ThreatClass, WorldGrid};

#[derive(Default)]
struct NodeState {
    phase: Option<MissionPhase>,
    phase_ticks: PhaseTicks,
    coverage: Vec<(u64, u32)>,
    candidates: BTreeMap<u32, (CellIndex, CandidateStatus, Option<ThreatClass>)>,
}

/// Recomputes the metrics of a run from its event log alone.
pub fn replay(text: &str) -> Result<MetricsReport, EngineError> {
    let log = EventLog::parse(text)?;
    let h = &log.header;
    let mut nodes: BTreeMap<NodeId, NodeState> = BTreeMap::new();
    nodes.insert(COMMAND_CENTRE, NodeState::default());
    for r in &h.robots {
        nodes.insert(r.id, NodeState::default());
    }
    let mut messages = MessageMetrics::default();
    let mut operator_dismissed = 0;
    let mut robots_failed = 0;
    let mut end = None;
    for rec in &log.records {
        let node = nodes.entry(rec.node).or_default();
        match &rec.body {
            RecordBody::Phase { to, .. } => {
                node.phase = Some(*to);
                node.phase_ticks.set(*to, rec.tick);
            }
            RecordBody::Coverage { covered, .. } => node.coverage.push((rec.tick, *covered)),
            RecordBody::Candidate { id, cell, status, class, .. } => {
                node.candidates.insert(*id, (*cell, *status, *class));
            }
            RecordBody::Net { sent, delivered, lost, expired, node_down } => {
                messages.sent += sent;
                messages.delivered += delivered;
                messages.lost += lost;
                messages.expired += expired;
                messages.node_down += node_down;
            }
            RecordBody::Operator { command: OperatorCommand::DismissCandidate { .. }, accepted: true, .. } => operator_dismissed += 1,
            RecordBody::RobotFailed { .. } => robots_failed += 1,
            RecordBody::End { outcome, .. } => end = Some((rec.tick, outcome.clone())),
            _ => {}
        }
    }
    let (ticks, outcome) = end.ok_or_else(|| EngineError::IncompatibleLog("no end record".into()))?;
    messages.finish();

    let phase = |s: &NodeState| s.phase.unwrap_or(MissionPhase::Explore);
    let mut reference = COMMAND_CENTRE;
    for (&n, s) in &nodes {
        if phase(s) > phase(&nodes[&reference]) {
            reference = n;
        }
    }
    let s = &nodes[&reference];
    let frac = |covered: u32| if h.reachable == 0 { 1.0 } else { covered as f64 / h.reachable as f64 };
    let covered_at = |t: u64| s.coverage.iter().take_while(|c| c.0 <= t).last().map_or(0, |c| c.1);
    let mut series: Vec<(u64, f64)> = (0..ticks).step_by(SAMPLE_EVERY as usize).map(|t| (t, frac(covered_at(t)))).collect();
    let coverage = frac(covered_at(u64::MAX));
    if series.last().map(|p| p.0) != Some(ticks) {
        series.push((ticks, coverage));
    }

    let grid = WorldGrid::uniform(h.width, h.height, Terrain::Sand).map_err(|e| EngineError::IncompatibleLog(e.to_string()))?;
    let cands: Vec<_> = s.candidates.values().copied().collect();
    let threats: Vec<_> = h.threats.iter().map(|t| (t.cell, t.class)).collect();
    let scored = score(&grid, &cands, &threats);
    Ok(build_report(
        h,
        ticks,
        outcome,
        phase(s),
        s.phase_ticks.clone(),
        reference,
        coverage,
        series,
        scored,
        operator_dismissed,
        messages,
        robots_failed,
    ))
}
