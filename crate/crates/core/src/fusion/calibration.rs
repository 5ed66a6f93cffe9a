use rand::Rng;
use serde::Serialize;

use super::{FusionError, FusionModels, ThreatHeatmap};
use crate::engine::{rng_stream, StreamPurpose};
use crate::sensors::{scan, LocalizationNoise, ReadingId, ScanTarget, SensorKind, SensorTable};
use crate::world::{Terrain, ThreatId, ThreatProfiles, WorldGrid};

/// Monte-Carlo reliability study of the fused posterior.
///
/// Each run draws one threat type from the profile prior, seeds every cell with
/// a threat of that type with the cell's terrain prior, scans random poses and
/// fuses. With `generative_match` fusion is handed the exact detection rate of
/// that type; otherwise it uses the marginal rate, as the simulator does.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub width: u32,
    pub height: u32,
    pub terrain: Terrain,
    pub sensor: SensorKind,
    pub scans_per_run: usize,
    pub generative_match: bool,
    /// Stop once this many cells land in `target`.
    pub min_target_cells: u64,
    pub target: (f64, f64),
    pub max_runs: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            width: 20,
            height: 20,
            terrain: Terrain::Sand,
            sensor: SensorKind::Emi,
            scans_per_run: 240,
            generative_match: true,
            min_target_cells: 10_000,
            target: (0.8, 0.9),
            max_runs: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub cells: u64,
    pub threats: u64,
}

impl ReliabilityBin {
    pub fn frequency(&self) -> Option<f64> {
        (self.cells > 0).then(|| self.threats as f64 / self.cells as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub runs: usize,
    pub cells: u64,
    /// Ten equal-width posterior bins.
    pub bins: Vec<ReliabilityBin>,
    pub target: ReliabilityBin,
}

pub fn calibration_harness(cfg: &CalibrationConfig, table: &SensorTable, profiles: &ThreatProfiles, seed: u64) -> Result<CalibrationReport, FusionError> {
    let model = table.get(cfg.sensor).ok_or_else(|| FusionError::Config(format!("{:?} is not a detector", cfg.sensor)))?;
    let grid = WorldGrid::uniform(cfg.width, cfg.height, cfg.terrain).map_err(|e| FusionError::Config(e.to_string()))?;
    let marginal = model.detection_model(profiles);
    let mut rng = rng_stream(seed, 0, StreamPurpose::Scan);
    let mut bins: Vec<ReliabilityBin> = (0..10).map(|k| ReliabilityBin { lo: k as f64 / 10.0, hi: (k + 1) as f64 / 10.0, cells: 0, threats: 0 }).collect();
    let (lo, hi) = cfg.target;
    let mut target = ReliabilityBin { lo, hi, cells: 0, threats: 0 };
    let (mut runs, mut cells) = (0, 0);
    let (w, h) = (cfg.width as f64 * grid.cell_size(), cfg.height as f64 * grid.cell_size());

    while runs < cfg.max_runs && target.cells < cfg.min_target_cells {
        runs += 1;
        let template = profiles.sample(ThreatId(0), 0, &mut rng);
        let mut threats = Vec::new();
        let mut threat_at = vec![None; grid.len()];
        for (c, slot) in threat_at.iter_mut().enumerate() {
            if rng.gen::<f64>() < grid.cell(c).terrain_prior {
                *slot = Some(threats.len());
                threats.push(crate::world::Threat { id: ThreatId(threats.len() as u32), cell: c, ..template.clone() });
            }
        }
        let mut dm = marginal;
        if cfg.generative_match {
            dm.p_det_eff = model.p_det(&template);
        }
        let models = FusionModels::from_models([dm], Some(1e-9))?;
        let mut heat = ThreatHeatmap::for_grid(&grid);
        let target_view = ScanTarget { grid: &grid, threats: &threats, threat_at: &threat_at };
        for k in 0..cfg.scans_per_run {
            let pose = (rng.gen::<f64>() * w, rng.gen::<f64>() * h);
            let id = ReadingId { robot: 0, seq: k as u32 };
            let r = scan(model, pose, &LocalizationNoise::NONE, target_view, &mut rng, id, 0);
            heat.integrate_reading(&r, &models)?;
        }
        for (c, truth) in threat_at.iter().enumerate() {
            let p = heat.posterior(c);
            let hit = truth.is_some() as u64;
            let b = &mut bins[((p * 10.0) as usize).min(9)];
            b.cells += 1;
            b.threats += hit;
            if p >= lo && p <= hi {
                target.cells += 1;
                target.threats += hit;
            }
            cells += 1;
        }
    }
    Ok(CalibrationReport { runs, cells, bins, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_fusion_is_calibrated_in_the_top_bins() {
        let cfg = CalibrationConfig { min_target_cells: 1500, ..Default::default() };
        let r = calibration_harness(&cfg, &SensorTable::default(), &ThreatProfiles::default(), 4).unwrap();
        let f = r.target.frequency().unwrap();
        assert!((0.75..=0.95).contains(&f), "{f}");
        assert_eq!(r.bins.iter().map(|b| b.cells).sum::<u64>(), r.cells);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = CalibrationConfig { min_target_cells: 50, ..Default::default() };
        let a = calibration_harness(&cfg, &SensorTable::default(), &ThreatProfiles::default(), 9).unwrap();
        assert_eq!(a, calibration_harness(&cfg, &SensorTable::default(), &ThreatProfiles::default(), 9).unwrap());
    }

    #[test]
    fn non_detector_is_rejected() {
        let cfg = CalibrationConfig { sensor: SensorKind::LidarNav, ..Default::default() };
        assert!(calibration_harness(&cfg, &SensorTable::default(), &ThreatProfiles::default(), 1).is_err());
    }
}
