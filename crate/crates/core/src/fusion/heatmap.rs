use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::sensors::{DetectionModel, SensorKind, SensorReading, SensorTable};
use crate::world::{CellIndex, ThreatProfiles, WorldGrid};

/// Fixed-point scale of stored log-odds increments (2^40).
pub const LOG_ODDS_SCALE: f64 = (1u64 << 40) as f64;
/// Priors are clamped to `[PRIOR_EPS, 1 - PRIOR_EPS]` so log-odds stay finite.
pub const PRIOR_EPS: f64 = 1e-6;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn quantize(x: f64) -> i64 {
    (x * LOG_ODDS_SCALE).round() as i64
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Ratios {
    model: DetectionModel,
    hit: i64,
    miss: i64,
}

/// Per-sensor likelihood ratios, precomputed and quantized.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionModels {
    ratios: BTreeMap<SensorKind, Ratios>,
}

impl FusionModels {
    /// Nominal models: detection probability marginalized over the device prior.
    ///
    /// With `clamp = Some(eps)` degenerate rates are pulled into `[eps, 1-eps]`;
    /// otherwise they are an error.
    pub fn from_table(table: &SensorTable, profiles: &ThreatProfiles, clamp: Option<f64>) -> Result<FusionModels, FusionError> {
        Self::from_models(table.iter().map(|m| m.detection_model(profiles)), clamp)
    }

    /// Explicit `(p_det, p_fp)` pairs, e.g. the exact generating values.
    pub fn from_models(models: impl IntoIterator<Item = DetectionModel>, clamp: Option<f64>) -> Result<FusionModels, FusionError> {
        let mut ratios = BTreeMap::new();
        for m in models {
            let (hit, miss) = match clamp {
                Some(eps) => (m.likelihood_ratio_clamped(true, eps), m.likelihood_ratio_clamped(false, eps)),
                None => (m.likelihood_ratio(true)?, m.likelihood_ratio(false)?),
            };
            ratios.insert(m.kind, Ratios { model: m, hit: quantize(hit), miss: quantize(miss) });
        }
        Ok(FusionModels { ratios })
    }

    pub fn model(&self, kind: SensorKind) -> Option<&DetectionModel> {
        self.ratios.get(&kind).map(|r| &r.model)
    }

    /// Quantized increment for one cell; zero for kinds without a model.
    pub fn increment(&self, kind: SensorKind, detected: bool) -> i64 {
        self.ratios.get(&kind).map_or(0, |r| if detected { r.hit } else { r.miss })
    }

    /// The increment actually applied, as a real number.
    pub fn likelihood_ratio(&self, kind: SensorKind, detected: bool) -> f64 {
        self.increment(kind, detected) as f64 / LOG_ODDS_SCALE
    }
}

/// Per-cell threat log-odds over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatHeatmap {
    width: u32,
    height: u32,
    prior: Vec<f64>,
    prior_logit: Vec<f64>,
    delta: Vec<i64>,
    last_update: Vec<Option<u64>>,
}

impl ThreatHeatmap {
    pub fn new(width: u32, height: u32, prior: Vec<f64>) -> ThreatHeatmap {
        assert_eq!(prior.len(), (width * height) as usize, "prior must cover the grid");
        let prior: Vec<f64> = prior.into_iter().map(|p| p.clamp(PRIOR_EPS, 1.0 - PRIOR_EPS)).collect();
        let prior_logit = prior.iter().map(|p| logit(*p)).collect();
        let n = prior.len();
        ThreatHeatmap { width, height, prior, prior_logit, delta: vec![0; n], last_update: vec![None; n] }
    }

    /// Heatmap seeded with each cell's terrain prior.
    pub fn for_grid(grid: &WorldGrid) -> ThreatHeatmap {
        Self::new(grid.width(), grid.height(), grid.cells().iter().map(|c| c.terrain_prior).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn prior(&self, cell: CellIndex) -> f64 {
        self.prior[cell]
    }

    pub fn log_odds(&self, cell: CellIndex) -> f64 {
        let d = self.delta[cell];
        if d == 0 {
            self.prior_logit[cell]
        } else {
            self.prior_logit[cell] + d as f64 / LOG_ODDS_SCALE
        }
    }

    pub fn posterior(&self, cell: CellIndex) -> f64 {
        sigmoid(self.log_odds(cell))
    }

    pub fn posteriors(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.posterior(c)).collect()
    }

    pub fn last_update(&self, cell: CellIndex) -> Option<u64> {
        self.last_update[cell]
    }

    /// Raw fixed-point evidence per cell.
    pub fn deltas(&self) -> &[i64] {
        &self.delta
    }

    /// The increments a reading contributes, one per covered cell.
    pub fn reading_deltas(reading: &SensorReading, models: &FusionModels) -> Vec<(CellIndex, i64)> {
        reading.cells.iter().zip(&reading.detections).map(|(c, d)| (*c, models.increment(reading.kind, *d))).collect()
    }

    pub fn integrate_reading(&mut self, reading: &SensorReading, models: &FusionModels) -> Result<(), FusionError> {
        if let Some(&cell) = reading.cells.iter().find(|c| **c >= self.len()) {
            return Err(FusionError::OutOfBounds { cell, len: self.len() });
        }
        for (cell, inc) in Self::reading_deltas(reading, models) {
            self.apply_delta(cell, inc, reading.tick);
        }
        Ok(())
    }

    /// Adds a fixed-point increment. `last_update` keeps the latest tick seen,
    /// so it too is independent of arrival order.
    pub fn apply_delta(&mut self, cell: CellIndex, inc: i64, tick: u64) {
        self.delta[cell] += inc;
        let lu = &mut self.last_update[cell];
        *lu = Some(lu.map_or(tick, |t| t.max(tick)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::ReadingId;

    fn reading(kind: SensorKind, cells: Vec<CellIndex>, det: Vec<bool>, tick: u64) -> SensorReading {
        let features = det.iter().map(|d| d.then_some([0.0; 4])).collect();
        SensorReading { id: ReadingId { robot: 1, seq: tick as u32 }, robot_id: 1, kind, tick, cells, detections: det, features, true_pose_error: 0.0 }
    }

    fn models() -> FusionModels {
        FusionModels::from_models(
            [
                DetectionModel { kind: SensorKind::Emi, p_det_eff: 0.8, p_fp: 0.1 },
                DetectionModel { kind: SensorKind::Rgb, p_det_eff: 0.3, p_fp: 0.3 },
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_detection_on_two_percent_prior() {
        let mut h = ThreatHeatmap::new(2, 1, vec![0.02, 0.02]);
        h.integrate_reading(&reading(SensorKind::Emi, vec![0], vec![true], 3), &models()).unwrap();
        // logit(0.02) = ln(0.02/0.98) = -3.8918203; + ln 8 = 2.0794415 -> -1.8123788
        let expect = 1.0 / (1.0 + 1.8123788f64.exp());
        assert!((h.posterior(0) - expect).abs() < 1e-6);
        assert!((h.posterior(0) - 0.1404).abs() < 1e-3);
        assert_eq!(h.posterior(1), 0.02);
        assert_eq!(h.last_update(0), Some(3));
        assert_eq!(h.last_update(1), None);
    }

    #[test]
    fn uninformative_sensor_changes_nothing() {
        let mut h = ThreatHeatmap::new(2, 1, vec![0.02, 0.3]);
        let before = h.posteriors();
        h.integrate_reading(&reading(SensorKind::Rgb, vec![0, 1], vec![true, false], 0), &models()).unwrap();
        assert_eq!(h.posteriors(), before);
    }

    #[test]
    fn unscanned_cells_keep_prior_log_odds() {
        let h = ThreatHeatmap::new(3, 1, vec![0.02, 0.005, 0.0]);
        assert_eq!(h.log_odds(0), logit(0.02));
        assert_eq!(h.log_odds(2), logit(PRIOR_EPS));
        assert!(h.log_odds(2).is_finite());
    }

    #[test]
    fn out_of_bounds_reading() {
        let mut h = ThreatHeatmap::new(2, 1, vec![0.02, 0.02]);
        let r = reading(SensorKind::Emi, vec![5], vec![true], 0);
        assert!(matches!(h.integrate_reading(&r, &models()), Err(FusionError::OutOfBounds { cell: 5, .. })));
    }

    #[test]
    fn degenerate_model_needs_clamp() {
        let m = DetectionModel { kind: SensorKind::Emi, p_det_eff: 1.0, p_fp: 0.0 };
        assert!(FusionModels::from_models([m], None).is_err());
        let f = FusionModels::from_models([m], Some(1e-6)).unwrap();
        assert!(f.likelihood_ratio(SensorKind::Emi, true).is_finite());
        assert!(f.likelihood_ratio(SensorKind::Emi, false) < 0.0);
    }
}
