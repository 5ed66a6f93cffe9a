use rand::Rng;
use serde::{Deserialize, Serialize};

use super::classify::Channel;
use super::{Features, ReadingId, SensorModel, SensorReading};
use crate::world::threat::gaussian;
use crate::world::{CellIndex, Charge, Threat, WorldGrid};

/// Pose-estimate noise: RTK-GPS quality outdoors, SLAM quality indoors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationNoise {
    pub outdoor_sd: f64,
    pub indoor_sd: f64,
}

impl Default for LocalizationNoise {
    fn default() -> Self {
        LocalizationNoise { outdoor_sd: 0.1, indoor_sd: 0.5 }
    }
}

impl LocalizationNoise {
    pub const NONE: LocalizationNoise = LocalizationNoise { outdoor_sd: 0.0, indoor_sd: 0.0 };
}

/// Ground truth as seen by a sensor.
#[derive(Clone, Copy)]
pub struct ScanTarget<'a> {
    pub grid: &'a WorldGrid,
    pub threats: &'a [Threat],
    /// Cell → index into `threats`.
    pub threat_at: &'a [Option<usize>],
}

impl<'a> ScanTarget<'a> {
    pub fn threat(&self, cell: CellIndex) -> Option<&'a Threat> {
        self.threat_at.get(cell).copied().flatten().map(|i| &self.threats[i])
    }
}

/// Non-obstacle cells whose centers lie within `radius` cells of `center`'s center, ascending.
pub fn footprint(grid: &WorldGrid, center: CellIndex, radius: f64) -> Vec<CellIndex> {
    let (cx, cy) = grid.coords(center);
    let r = radius.max(0.0).floor() as i64;
    let r2 = radius * radius + 1e-9;
    let mut cells = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if let Ok(i) = grid.index_of(x, y) {
                if !grid.cell(i).obstacle {
                    cells.push(i);
                }
            }
        }
    }
    cells
}

fn channel_truth(threat: Option<&Threat>, channel: Channel) -> f64 {
    match (threat, channel) {
        (Some(t), Channel::Metal) => t.metal_fraction,
        (Some(t), Channel::Chem) => match t.charge {
            Charge::HighExplosive => 1.0,
            Charge::LowExplosive => 0.0,
        },
        (Some(t), Channel::Density) => t.container_density,
        (Some(t), Channel::Visual) => (1.0 - t.depth / super::model::SURFACE_CUE_DEPTH).clamp(0.0, 1.0),
        // clutter
        (None, Channel::Metal) => 0.1,
        (None, Channel::Chem) => 0.0,
        (None, Channel::Density) => 0.2,
        (None, Channel::Visual) => 0.3,
    }
}

/// One scan from a robot whose true position is `pose` (meters).
///
/// The robot reports the footprint around its *estimated* pose; what it actually
/// senses is the same footprint shifted back onto its true cell, so localization
/// error moves evidence onto neighbouring cells.
#[allow(clippy::too_many_arguments)]
pub fn scan<R: Rng + ?Sized>(
    model: &SensorModel,
    pose: (f64, f64),
    noise: &LocalizationNoise,
    target: ScanTarget<'_>,
    rng: &mut R,
    id: ReadingId,
    tick: u64,
) -> SensorReading {
    let grid = target.grid;
    let true_cell = grid.cell_at(pose.0, pose.1).expect("scan pose must be inside the grid");
    let sd = if grid.cell(true_cell).indoor { noise.indoor_sd } else { noise.outdoor_sd };
    let ex = gaussian(pose.0, sd, rng);
    let ey = gaussian(pose.1, sd, rng);
    let (w, h) = (grid.width() as f64 * grid.cell_size(), grid.height() as f64 * grid.cell_size());
    let est = (ex.clamp(0.0, w - 1e-9), ey.clamp(0.0, h - 1e-9));
    let est_cell = grid.cell_at(est.0, est.1).expect("clamped into the grid");
    let (tx, ty) = grid.coords(true_cell);
    let (ex_, ey_) = grid.coords(est_cell);
    let (ox, oy) = (ex_ as i64 - tx as i64, ey_ as i64 - ty as i64);

    let cells = footprint(grid, est_cell, model.footprint_radius);
    let channel = Channel::of(model.kind);
    let mut detections = Vec::with_capacity(cells.len());
    let mut features = Vec::with_capacity(cells.len());
    for &reported in &cells {
        let (rx, ry) = grid.coords(reported);
        let physical = grid.index_of(rx as i64 - ox, ry as i64 - oy).ok();
        let threat = physical.and_then(|c| target.threat(c));
        let p = match threat {
            Some(t) => model.p_det(t),
            None => model.p_fp,
        };
        let hit = rng.gen::<f64>() < p;
        detections.push(hit);
        features.push(hit.then(|| {
            let mut f: Features = [0.0; 4];
            if let Some(ch) = channel {
                f[ch.index()] = gaussian(channel_truth(threat, ch), model.feature_noise, rng);
            }
            f
        }));
    }
    SensorReading {
        id,
        robot_id: id.robot,
        kind: model.kind,
        tick,
        cells,
        detections,
        features,
        true_pose_error: (est.0 - pose.0).hypot(est.1 - pose.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{rng_stream, StreamPurpose};
    use crate::sensors::SensorKind;
    use crate::world::{Initiator, Terrain, ThreatClass, ThreatId};

    fn setup() -> (WorldGrid, Vec<Threat>, Vec<Option<usize>>) {
        let grid = WorldGrid::uniform(9, 9, Terrain::Sand).unwrap();
        let t = Threat {
            id: ThreatId(1),
            class: ThreatClass::Landmine,
            charge: Charge::LowExplosive,
            initiator: Initiator::Mechanical,
            metal_fraction: 0.8,
            container_density: 0.5,
            depth: 0.0,
            cell: 40,
        };
        let mut at = vec![None; grid.len()];
        at[40] = Some(0);
        (grid, vec![t], at)
    }

    #[test]
    fn footprint_shapes() {
        let grid = WorldGrid::uniform(9, 9, Terrain::Sand).unwrap();
        assert_eq!(footprint(&grid, 40, 0.0), vec![40]);
        assert_eq!(footprint(&grid, 40, 1.0).len(), 5);
        assert_eq!(footprint(&grid, 40, 2.0).len(), 13);
        assert_eq!(footprint(&grid, 0, 1.0), vec![0, 1, 9]);
    }

    #[test]
    fn perfect_sensor_hits_exactly_the_threat() {
        let (grid, threats, at) = setup();
        let mut m = SensorModel::new(SensorKind::Emi, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        m.p_det_base = 1.0;
        let mut rng = rng_stream(3, 1, StreamPurpose::Scan);
        let target = ScanTarget { grid: &grid, threats: &threats, threat_at: &at };
        let r = scan(&m, grid.center(40), &LocalizationNoise::NONE, target, &mut rng, ReadingId { robot: 1, seq: 0 }, 5);
        assert!(r.is_consistent());
        assert_eq!(r.tick, 5);
        let hits: Vec<_> = r.detected_cells().map(|(c, f)| (c, f[0])).collect();
        assert_eq!(hits, vec![(40, 0.8)]);
    }

    #[test]
    fn identical_rng_state_identical_reading() {
        let (grid, threats, at) = setup();
        let m = SensorTable::default().rgb;
        let target = ScanTarget { grid: &grid, threats: &threats, threat_at: &at };
        let noise = LocalizationNoise::default();
        let mut a = rng_stream(9, 2, StreamPurpose::Scan);
        let mut b = a.clone();
        let id = ReadingId { robot: 2, seq: 7 };
        assert_eq!(scan(&m, (4.3, 4.6), &noise, target, &mut a, id, 1), scan(&m, (4.3, 4.6), &noise, target, &mut b, id, 1));
    }

    use crate::sensors::SensorTable;
}
