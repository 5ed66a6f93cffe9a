use serde::{Deserialize, Serialize};

use super::{FusionError, ThreatHeatmap};
use crate::sensors::{classify_evidence, SensorModel};
use crate::world::{Cell, CellIndex, ThreatClass, ThreatProfiles};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Suspected,
    Confirmed,
    Dismissed,
    Classified,
}

/// A suspected threat location with a class belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u32,
    pub cell: CellIndex,
    pub posterior: f64,
    /// Normalized log class probabilities, IED, EO, landmine.
    pub class_logp: [f64; 3],
    pub status: CandidateStatus,
    /// A contact sensor (XRB or Raman) has contributed class evidence.
    pub contact_evidence: bool,
}

fn log_sum_exp(v: &[f64; 3]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Candidate {
    /// Starts from the class prior (uniform when `class_prior` is `None`).
    pub fn new(id: u32, cell: CellIndex, posterior: f64, class_prior: Option<[f64; 3]>) -> Candidate {
        let prior = class_prior.unwrap_or([1.0 / 3.0; 3]);
        let mut c = Candidate {
            id,
            cell,
            posterior,
            class_logp: prior.map(|p| p.ln()),
            status: CandidateStatus::Suspected,
            contact_evidence: false,
        };
        c.normalize();
        c
    }

    fn normalize(&mut self) {
        let z = log_sum_exp(&self.class_logp);
        if z.is_finite() {
            self.class_logp = self.class_logp.map(|x| x - z);
        }
    }

    pub fn class_posterior(&self) -> [f64; 3] {
        self.class_logp.map(f64::exp)
    }

    /// Most probable class (lowest index on ties) and its probability.
    pub fn best_class(&self) -> (ThreatClass, f64) {
        let p = self.class_posterior();
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        (ThreatClass::from_index(best), p[best])
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self.status, CandidateStatus::Dismissed | CandidateStatus::Classified)
    }

    fn transition(&mut self, to: CandidateStatus) -> Result<(), FusionError> {
        use CandidateStatus::*;
        let ok = matches!((self.status, to), (Suspected, Confirmed) | (Suspected, Dismissed) | (Confirmed, Dismissed) | (Confirmed, Classified));
        if !ok {
            return Err(FusionError::InvalidTransition { cell: self.cell, from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    pub fn confirm(&mut self) -> Result<(), FusionError> {
        self.transition(CandidateStatus::Confirmed)
    }

    pub fn dismiss(&mut self) -> Result<(), FusionError> {
        self.transition(CandidateStatus::Dismissed)
    }

    /// Classifies a confirmed candidate once the class belief is strong enough
    /// and contact evidence exists. Returns whether the status changed.
    pub fn try_classify(&mut self, threshold: f64) -> bool {
        if self.status == CandidateStatus::Confirmed && self.contact_evidence && self.best_class().1 >= threshold {
            self.status = CandidateStatus::Classified;
            return true;
        }
        false
    }

    /// Classifies a confirmed candidate regardless of the belief threshold.
    pub fn force_classify(&mut self) -> Result<(), FusionError> {
        self.transition(CandidateStatus::Classified)
    }

    /// Replaces the class belief with `class_prior` times the summed
    /// per-class log-likelihoods `log_lik`.
    pub fn set_class_evidence(&mut self, class_prior: [f64; 3], log_lik: [f64; 3]) {
        for i in 0..3 {
            self.class_logp[i] = class_prior[i].ln() + log_lik[i];
        }
        self.normalize();
    }

    /// Folds one detection's features into the class belief.
    pub fn update_classification(
        &mut self,
        features: &[f64],
        model: &SensorModel,
        profiles: &ThreatProfiles,
        threshold: f64,
    ) -> Result<(), FusionError> {
        if self.is_resolved() {
            let to = if self.status == CandidateStatus::Dismissed { CandidateStatus::Classified } else { self.status };
            return Err(FusionError::InvalidTransition { cell: self.cell, from: self.status, to });
        }
        let ev = classify_evidence(features, model, profiles)?;
        for (l, e) in self.class_logp.iter_mut().zip(ev) {
            *l += e;
        }
        self.normalize();
        if model.kind.is_contact() {
            self.contact_evidence = true;
        }
        self.try_classify(threshold);
        Ok(())
    }
}

/// An 8-connected region of cells at or above a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    /// Highest-posterior member (lowest index on ties).
    pub cell: CellIndex,
    pub posterior: f64,
    /// Members, ascending.
    pub members: Vec<CellIndex>,
}

/// Hot regions ordered by (posterior desc, cell asc). Cells where `mask` is
/// false are ignored.
pub fn find_blobs(heatmap: &ThreatHeatmap, threshold: f64, mask: Option<&[bool]>) -> Vec<Blob> {
    let (w, h) = (heatmap.width() as i64, heatmap.height() as i64);
    let post = heatmap.posteriors();
    let hot: Vec<bool> = (0..post.len()).map(|c| post[c] >= threshold && mask.is_none_or(|m| m[c])).collect();
    let mut seen = vec![false; post.len()];
    let mut blobs = Vec::new();
    for start in 0..post.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(c) = stack.pop() {
            members.push(c);
            let (x, y) = ((c as i64) % w, (c as i64) / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if hot[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        members.sort_unstable();
        let mut best = members[0];
        for &m in &members[1..] {
            if post[m] > post[best] {
                best = m;
            }
        }
        blobs.push(Blob { cell: best, posterior: post[best], members });
    }
    blobs.sort_by(|a, b| b.posterior.total_cmp(&a.posterior).then(a.cell.cmp(&b.cell)));
    blobs
}

/// One suspected candidate per hot region, numbered in output order.
pub fn extract_candidates(heatmap: &ThreatHeatmap, threshold: f64) -> Vec<Candidate> {
    find_blobs(heatmap, threshold, None)
        .into_iter()
        .enumerate()
        .map(|(i, b)| Candidate::new(i as u32, b.cell, b.posterior, None))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub vision: f64,
    pub terrain: f64,
    pub posterior: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        PriorityWeights { vision: 1.0, terrain: 5.0, posterior: 2.0 }
    }
}

/// Scan-order score: vision hits, terrain prior and current posterior. Higher first.
pub fn priority_score(candidate: &Candidate, cell: &Cell, vision_hits: u32, w: &PriorityWeights) -> f64 {
    w.vision * (1.0 + vision_hits as f64).ln() + w.terrain * cell.terrain_prior + w.posterior * candidate.posterior
}
