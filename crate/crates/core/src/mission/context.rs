use crate::fleet::{FleetConfig, RobotId, RobotKind, distance_field};
use crate::fusion::{FusionError, FusionModels};
use crate::sensors::SensorKind;
use crate::world::{CellIndex, Scenario, ThreatProfiles, WorldGrid};

use super::tasks::Region;
use super::MissionConfig;

/// Likelihood clamp used when `clamp_degenerate` is set.
pub const DEGENERATE_CLAMP: f64 = 1e-6;

/// Mission-wide facts every coordinator shares: the map, the roster and the sensor models.
///
/// Nothing here is ground truth about threats.
#[derive(Clone, Debug)]
pub struct MissionContext {
    pub grid: WorldGrid,
    pub config: MissionConfig,
    pub fleet: FleetConfig,
    pub profiles: ThreatProfiles,
    pub models: FusionModels,
    /// Cells some robot of the fleet can reach from the deployment zone.
    pub reachable: Vec<bool>,
    pub reachable_count: u32,
    pub regions: Vec<Region>,
    pub deploy: CellIndex,
    pub roster: Vec<(RobotId, RobotKind)>,
    /// Step distance to the deployment zone, per robot kind in the fleet.
    home_dist: Vec<(RobotKind, Vec<Option<u32>>)>,
}

impl MissionContext {
    pub fn new(scenario: &Scenario) -> Result<MissionContext, FusionError> {
        let clamp = scenario.mission_config.clamp_degenerate.then_some(DEGENERATE_CLAMP);
        let models = FusionModels::from_table(&scenario.fleet_config.sensors, &scenario.threat_profiles, clamp)?;
        Ok(Self::with_models(scenario, models))
    }

    /// Context with explicit fusion models (e.g. the exact generating rates).
    pub fn with_models(scenario: &Scenario, models: FusionModels) -> MissionContext {
        let grid = scenario.grid.clone();
        let [dx, dy] = scenario.fleet_config.deploy_cell;
        let deploy = grid.index_of(dx as i64, dy as i64).expect("validated deploy cell");
        let mut roster = Vec::new();
        let mut id = 1;
        for kind in RobotKind::ALL {
            for _ in 0..scenario.fleet_config.kind(kind).count {
                roster.push((id, kind));
                id += 1;
            }
        }
        let mut reachable = vec![false; grid.len()];
        let mut kinds: Vec<RobotKind> = roster.iter().map(|r| r.1).collect();
        kinds.dedup();
        let mut home_dist = Vec::new();
        for kind in kinds {
            let field = distance_field(&grid, deploy, kind);
            for (c, d) in field.iter().enumerate() {
                if d.is_some() && !grid.cell(c).obstacle {
                    reachable[c] = true;
                }
            }
            home_dist.push((kind, field));
        }
        let reachable_count = reachable.iter().filter(|r| **r).count() as u32;
        let regions = Region::tile(&grid, scenario.mission_config.region_size, &reachable);
        MissionContext {
            grid,
            config: scenario.mission_config.clone(),
            fleet: scenario.fleet_config.clone(),
            profiles: scenario.threat_profiles.clone(),
            models,
            reachable,
            reachable_count,
            regions,
            deploy,
            roster,
            home_dist,
        }
    }

    /// Steps from `cell` back to the deployment zone for `kind`.
    pub fn home_distance(&self, kind: RobotKind, cell: CellIndex) -> Option<u32> {
        self.home_dist.iter().find(|(k, _)| *k == kind).and_then(|(_, f)| f[cell])
    }

    /// Footprint radius of a sensor in whole cells.
    pub fn sensor_radius(&self, kind: SensorKind) -> u32 {
        self.fleet.sensors.get(kind).map_or(0, |m| m.footprint_radius.max(0.0).floor() as u32)
    }

    pub fn kind_of(&self, robot: RobotId) -> Option<RobotKind> {
        self.roster.iter().find(|r| r.0 == robot).map(|r| r.1)
    }

    /// `SUGV-2` style name, numbered within the kind.
    pub fn robot_name(&self, robot: RobotId) -> Option<String> {
        let kind = self.kind_of(robot)?;
        let n = self.roster.iter().filter(|r| r.1 == kind && r.0 <= robot).count();
        Some(format!("{}-{}", kind.label(), n))
    }

    /// Robot by numeric id or name (case-insensitive).
    pub fn resolve_robot(&self, key: &str) -> Option<RobotId> {
        if let Ok(id) = key.parse::<RobotId>() {
            return self.kind_of(id).map(|_| id);
        }
        self.roster.iter().map(|r| r.0).find(|id| self.robot_name(*id).is_some_and(|n| n.eq_ignore_ascii_case(key)))
    }
}
