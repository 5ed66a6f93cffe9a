//! Environment model: the 2-D cell grid, ground-truth threats and scenarios.

mod format;
mod generate;
mod grid;
pub(crate) mod threat;

pub use format::{load_scenario, parse_scenario, save_scenario, scenario_to_string, FORMAT_VERSION};
pub use generate::{generate_scenario, ScenarioParams};
pub use grid::{Cell, CellIndex, Terrain, TerrainPriors, WorldGrid};
pub use threat::{Charge, ClassProfile, Initiator, Threat, ThreatClass, ThreatId, ThreatProfiles};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{FleetConfig, RobotKind};
use crate::mission::MissionConfig;
use crate::netsim::NetConfig;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cell ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfBounds { x: i64, y: i64, width: u32, height: u32 },
    #[error("cannot place {requested} threats on {available} free cells")]
    InfeasiblePlacement { requested: usize, available: usize },
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error("parse error{}: {field}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, field: String, message: String },
    #[error("unsupported scenario format_version {found} (this build reads version {expected})")]
    VersionMismatch { found: i64, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which controller coordinates the fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Centralized,
    Mns,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerMode::Centralized => "centralized",
            ControllerMode::Mns => "mns",
        })
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centralized" | "centralised" => Ok(ControllerMode::Centralized),
            "mns" | "decentralized" => Ok(ControllerMode::Mns),
            other => Err(format!("unknown controller mode `{other}` (expected centralized|mns)")),
        }
    }
}

/// A complete, self-contained simulation input.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: WorldGrid,
    pub threats: Vec<Threat>,
    pub fleet_config: FleetConfig,
    pub net_config: NetConfig,
    pub mission_config: MissionConfig,
    pub threat_profiles: ThreatProfiles,
    pub seed: u64,
    pub controller_mode: ControllerMode,
}

impl Scenario {
    /// Ground-truth lookup used by sensors and metrics. Controllers never call this.
    pub fn ground_truth_at(&self, cell: CellIndex) -> Result<Option<&Threat>, WorldError> {
        self.grid.check_index(cell)?;
        Ok(self.threats.iter().find(|t| t.cell == cell))
    }

    /// Dense cell → threat index table.
    pub fn threat_index(&self) -> Vec<Option<usize>> {
        let mut table = vec![None; self.grid.len()];
        for (i, t) in self.threats.iter().enumerate() {
            if let Some(slot) = table.get_mut(t.cell) {
                *slot = Some(i);
            }
        }
        table
    }

    /// Checks the cross-field invariants that a file could violate.
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut seen = std::collections::BTreeMap::new();
        for t in &self.threats {
            let field = format!("threats[id={}]", t.id);
            if t.cell >= self.grid.len() {
                return Err(WorldError::Parse {
                    line: None,
                    field,
                    message: format!("cell {} is out of bounds", t.cell),
                });
            }
            if self.grid.cell(t.cell).obstacle {
                return Err(WorldError::Parse { line: None, field, message: "threat placed on an obstacle cell".into() });
            }
            if !(t.depth >= 0.0) || !(0.0..=1.0).contains(&t.metal_fraction) || !(0.0..=1.0).contains(&t.container_density) {
                return Err(WorldError::Parse {
                    line: None,
                    field,
                    message: "depth must be >= 0 and metal_fraction/container_density in [0,1]".into(),
                });
            }
            if let Some(other) = seen.insert(t.cell, t.id) {
                return Err(WorldError::Parse {
                    line: None,
                    field,
                    message: format!("shares cell {} with threat {}", t.cell, other),
                });
            }
        }
        let deploy = self.fleet_config.deploy_cell;
        let idx = self.grid.index_of(deploy[0] as i64, deploy[1] as i64).map_err(|_| WorldError::Parse {
            line: None,
            field: "fleet_config.deploy_cell".into(),
            message: "outside the grid".into(),
        })?;
        if self.grid.cell(idx).obstacle {
            return Err(WorldError::Parse {
                line: None,
                field: "fleet_config.deploy_cell".into(),
                message: "deployment zone is an obstacle".into(),
            });
        }
        Ok(())
    }
}

/// Can a robot of `kind` occupy `cell`?
///
/// Ground robots are blocked by every obstacle. Aerial robots fly over outdoor
/// obstacles but not through indoor ones (walls and ceilings), so indoor space is
/// only entered through non-obstacle door cells.
pub fn traversable(grid: &WorldGrid, cell: CellIndex, kind: RobotKind) -> Result<bool, WorldError> {
    grid.check_index(cell)?;
    let c = grid.cell(cell);
    Ok(if kind.is_aerial() { !(c.obstacle && c.indoor) } else { !c.obstacle })
}
