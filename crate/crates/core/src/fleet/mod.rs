//! Robots: kinds, sensor loadouts, kinematics, batteries and path planning.

mod path;
mod robot;

pub use path::{distance_field, plan_path};
pub use robot::{default_fleet, ArmState, Fleet, Health, Pose, Route, RobotState, ScanAction, Waypoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensors::{LocalizationNoise, SensorKind, SensorTable};
use crate::world::CellIndex;

pub type RobotId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum FleetError {
    #[error("no {kind:?} path from cell {from} to cell {to}")]
    Unreachable { from: CellIndex, to: CellIndex, kind: RobotKind },
    #[error("cell {cell} is not traversable for {kind:?}")]
    NotTraversable { cell: CellIndex, kind: RobotKind },
    #[error("robot {robot} has no {sensor:?} sensor")]
    SensorUnavailable { robot: String, sensor: SensorKind },
    #[error("unknown robot `{0}`")]
    UnknownRobot(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    Suav,
    Luav,
    Sugv,
    Lugv,
}

impl RobotKind {
    pub const ALL: [RobotKind; 4] = [RobotKind::Suav, RobotKind::Luav, RobotKind::Sugv, RobotKind::Lugv];

    pub fn is_aerial(self) -> bool {
        matches!(self, RobotKind::Suav | RobotKind::Luav)
    }

    /// Mounted sensors, navigation included.
    pub fn loadout(self) -> &'static [SensorKind] {
        use SensorKind::*;
        match self {
            RobotKind::Suav => &[Rgb, LidarNav],
            RobotKind::Luav => &[Gpr, Hyperspectral, Ir, Rgb, LidarNav],
            RobotKind::Sugv => &[Emi, LidarNav],
            RobotKind::Lugv => &[Xrb, Raman, Emi, LidarNav],
        }
    }

    pub fn has_arm(self) -> bool {
        self == RobotKind::Lugv
    }

    pub fn label(self) -> &'static str {
        match self {
            RobotKind::Suav => "SUAV",
            RobotKind::Luav => "LUAV",
            RobotKind::Sugv => "SUGV",
            RobotKind::Lugv => "LUGV",
        }
    }
}

impl std::str::FromStr for RobotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "suav" => Ok(RobotKind::Suav),
            "luav" => Ok(RobotKind::Luav),
            "sugv" => Ok(RobotKind::Sugv),
            "lugv" => Ok(RobotKind::Lugv),
            other => Err(format!("unknown robot kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindConfig {
    pub count: u32,
    /// m/s
    pub speed: f64,
    /// Battery capacity in seconds of operation.
    pub battery_s: f64,
}

/// Fleet composition and platform parameters.
///
/// The SUGV carries up to 50 kg of payload and the LUGV a 6-DoF arm; neither
/// figure affects the simulation beyond the arm's deployment dwell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    /// Deployment zone (cell x, y); robots start and recharge here.
    pub deploy_cell: [u32; 2],
    /// Time for the LUGV arm to deploy before contact sensing, seconds.
    pub arm_dwell_s: f64,
    pub suav: KindConfig,
    pub luav: KindConfig,
    pub sugv: KindConfig,
    pub lugv: KindConfig,
    pub localization: LocalizationNoise,
    pub sensors: SensorTable,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            deploy_cell: [1, 1],
            arm_dwell_s: 60.0,
            suav: KindConfig { count: 2, speed: 10.0, battery_s: 1500.0 },
            luav: KindConfig { count: 1, speed: 5.0, battery_s: 2400.0 },
            sugv: KindConfig { count: 2, speed: 1.5, battery_s: 18000.0 },
            lugv: KindConfig { count: 1, speed: 0.8, battery_s: 43200.0 },
            localization: LocalizationNoise::default(),
            sensors: SensorTable::default(),
        }
    }
}

impl FleetConfig {
    pub fn kind(&self, kind: RobotKind) -> &KindConfig {
        match kind {
            RobotKind::Suav => &self.suav,
            RobotKind::Luav => &self.luav,
            RobotKind::Sugv => &self.sugv,
            RobotKind::Lugv => &self.lugv,
        }
    }

    pub fn kind_mut(&mut self, kind: RobotKind) -> &mut KindConfig {
        match kind {
            RobotKind::Suav => &mut self.suav,
            RobotKind::Luav => &mut self.luav,
            RobotKind::Sugv => &mut self.sugv,
            RobotKind::Lugv => &mut self.lugv,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in RobotKind::ALL {
            let k = self.kind(kind);
            if !(k.speed > 0.0) || !(k.battery_s > 0.0) {
                return Err(format!("{}: speed and battery_s must be > 0", kind.label()));
            }
        }
        if !(self.arm_dwell_s >= 0.0) {
            return Err("arm_dwell_s must be >= 0".into());
        }
        if !(self.localization.outdoor_sd >= 0.0) || !(self.localization.indoor_sd >= 0.0) {
            return Err("localization noise must be >= 0".into());
        }
        self.sensors.validate().map_err(|e| e.to_string())
    }

    pub fn total_robots(&self) -> u32 {
        RobotKind::ALL.iter().map(|k| self.kind(*k).count).sum()
    }
}
