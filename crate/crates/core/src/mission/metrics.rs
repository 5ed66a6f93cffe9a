use serde::{Deserialize, Serialize};

use super::MissionPhase;
use crate::fusion::CandidateStatus;
use crate::netsim::NodeId;
use crate::world::{CellIndex, ThreatClass, WorldGrid};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTicks {
    pub specialised_detection: Option<u64>,
    pub confirmation: Option<u64>,
    pub complete: Option<u64>,
}

impl PhaseTicks {
    pub fn set(&mut self, phase: MissionPhase, tick: u64) {
        match phase {
            MissionPhase::Explore => {}
            MissionPhase::SpecialisedDetection => self.specialised_detection = Some(tick),
            MissionPhase::Confirmation => self.confirmation = Some(tick),
            MissionPhase::Complete => self.complete = Some(tick),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageMetrics {
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
    pub expired: u64,
    pub node_down: u64,
    /// Dropped over sent; 0 when nothing was sent.
    pub loss_rate: f64,
}

impl MessageMetrics {
    pub fn finish(&mut self) {
        let dropped = self.lost + self.expired + self.node_down;
        self.loss_rate = if self.sent == 0 { 0.0 } else { dropped as f64 / self.sent as f64 };
    }
}

/// Outcome metrics of one run, identical whether computed live or from the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub mode: String,
    pub seed: u64,
    pub ticks: u64,
    /// `complete`, `incomplete` or `aborted`.
    pub outcome: String,
    pub phase_reached: MissionPhase,
    pub phase_ticks: PhaseTicks,
    /// Node whose knowledge the mission metrics describe.
    pub reference_node: NodeId,
    pub coverage: f64,
    /// `(tick, coverage)` every 100 ticks and at the end.
    pub coverage_series: Vec<(u64, f64)>,
    pub threats: usize,
    pub candidates: usize,
    /// Candidates not dismissed.
    pub declared: usize,
    pub true_positives: usize,
    /// `None` without threats.
    pub recall: Option<f64>,
    /// `None` without threats or without declared candidates.
    pub precision: Option<f64>,
    /// Candidates with no threat within one cell.
    pub false_candidates: usize,
    pub classified: usize,
    pub classification_accuracy: Option<f64>,
    pub dismissed: usize,
    pub operator_dismissed: usize,
    pub messages: MessageMetrics,
    pub robots_failed: u32,
}

/// For each candidate cell, the index of the nearest threat within one cell
/// (Chebyshev), lowest index on ties.
pub fn match_candidates(grid: &WorldGrid, candidates: &[CellIndex], threats: &[(CellIndex, ThreatClass)]) -> Vec<Option<usize>> {
    candidates
        .iter()
        .map(|&c| {
            let mut best: Option<(u32, usize)> = None;
            for (i, (t, _)) in threats.iter().enumerate() {
                let d = grid.chebyshev(c, *t);
                if d <= 1 && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            best.map(|b| b.1)
        })
        .collect()
}

/// Final candidate scoring shared by the live and replay paths.
pub(crate) struct Scored {
    pub candidates: usize,
    pub declared: usize,
    pub true_positives: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub false_candidates: usize,
    pub classified: usize,
    pub classification_accuracy: Option<f64>,
    pub dismissed: usize,
}

pub(crate) fn score(grid: &WorldGrid, cands: &[(CellIndex, CandidateStatus, Option<ThreatClass>)], threats: &[(CellIndex, ThreatClass)]) -> Scored {
    let cells: Vec<CellIndex> = cands.iter().map(|c| c.0).collect();
    let matched = match_candidates(grid, &cells, threats);
    let declared: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].1 != CandidateStatus::Dismissed).collect();
    let mut found = vec![false; threats.len()];
    let mut tp = 0;
    for &i in &declared {
        if let Some(t) = matched[i] {
            found[t] = true;
            tp += 1;
        }
    }
    let hit_threats = found.iter().filter(|f| **f).count();
    let classified: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].1 == CandidateStatus::Classified).collect();
    let judged: Vec<bool> = classified.iter().filter_map(|&i| matched[i].map(|t| cands[i].2 == Some(threats[t].1))).collect();
    Scored {
        candidates: cands.len(),
        declared: declared.len(),
        true_positives: tp,
        recall: (!threats.is_empty()).then(|| hit_threats as f64 / threats.len() as f64),
        precision: (!threats.is_empty() && !declared.is_empty()).then(|| tp as f64 / declared.len() as f64),
        false_candidates: matched.iter().filter(|m| m.is_none()).count(),
        classified: classified.len(),
        classification_accuracy: (!judged.is_empty()).then(|| judged.iter().filter(|j| **j).count() as f64 / judged.len() as f64),
        dismissed: cands.iter().filter(|c| c.1 == CandidateStatus::Dismissed).count(),
    }
}
