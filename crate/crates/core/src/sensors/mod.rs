//! Parametric sensor models.
//!
//! Every detector is a five-parameter curve: a base detection probability,
//! an exponential decay with burial depth, a hard depth cutoff, a per-cell
//! false-positive rate and a feature-noise level. The kind of sensor decides
//! which physical property of a device couples into detection (metal for EMI,
//! exposure for cameras, and so on) and which evidence channel it reports.

mod classify;
mod model;
mod scan;

pub use classify::{classify_evidence, Channel};
pub use model::{DetectionModel, SensorModel, SensorTable};
pub use scan::{footprint, scan, LocalizationNoise, ScanTarget};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::CellIndex;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("degenerate {kind:?} model: p_det={p_det}, p_fp={p_fp} gives infinite log-odds")]
    DegenerateModel { kind: SensorKind, p_det: f64, p_fp: f64 },
    #[error("feature vector of length {len} is not valid evidence for {kind:?}")]
    UnknownFeatureShape { kind: SensorKind, len: usize },
    #[error("invalid {kind:?} model: {reason}")]
    InvalidModel { kind: SensorKind, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Rgb,
    Ir,
    Hyperspectral,
    LidarNav,
    Gpr,
    Emi,
    Xrb,
    Raman,
}

impl SensorKind {
    pub const ALL: [SensorKind; 8] = [
        SensorKind::Rgb,
        SensorKind::Ir,
        SensorKind::Hyperspectral,
        SensorKind::LidarNav,
        SensorKind::Gpr,
        SensorKind::Emi,
        SensorKind::Xrb,
        SensorKind::Raman,
    ];

    /// Sensors that produce threat evidence (everything except navigation lidar).
    pub fn is_detector(self) -> bool {
        self != SensorKind::LidarNav
    }

    /// Arm-mounted sensors that need physical proximity to the object.
    pub fn is_contact(self) -> bool {
        matches!(self, SensorKind::Xrb | SensorKind::Raman)
    }

    pub fn is_camera(self) -> bool {
        matches!(self, SensorKind::Rgb | SensorKind::Ir | SensorKind::Hyperspectral)
    }

    /// Sensors whose scans count as "specialised" for the second sweep gate.
    pub fn is_specialised_ground(self) -> bool {
        matches!(self, SensorKind::Gpr | SensorKind::Emi)
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Rgb => "rgb",
            SensorKind::Ir => "ir",
            SensorKind::Hyperspectral => "hyperspectral",
            SensorKind::LidarNav => "lidar_nav",
            SensorKind::Gpr => "gpr",
            SensorKind::Emi => "emi",
            SensorKind::Xrb => "xrb",
            SensorKind::Raman => "raman",
        }
    }
}

/// Globally unique reading identifier: producing robot plus its sequence number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReadingId {
    pub robot: u32,
    pub seq: u32,
}

impl std::fmt::Display for ReadingId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "R{}.{}", self.robot, self.seq)
    }
}

/// Evidence attached to one detected cell: `[metal, chem, density, visual]`.
pub type Features = [f64; 4];

/// One scan event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub id: ReadingId,
    pub robot_id: u32,
    pub kind: SensorKind,
    pub tick: u64,
    /// Cells the robot believes it covered, ascending.
    pub cells: Vec<CellIndex>,
    pub detections: Vec<bool>,
    /// Aligned with `cells`; `Some` exactly where a detection fired.
    pub features: Vec<Option<Features>>,
    /// Distance between believed and true pose, meters. Diagnostic only.
    pub true_pose_error: f64,
}

impl SensorReading {
    pub fn is_consistent(&self) -> bool {
        self.detections.len() == self.cells.len()
            && self.features.len() == self.cells.len()
            && self.detections.iter().zip(&self.features).all(|(d, f)| *d == f.is_some())
    }

    pub fn detected_cells(&self) -> impl Iterator<Item = (CellIndex, &Features)> + '_ {
        self.cells.iter().zip(&self.features).filter_map(|(c, f)| f.as_ref().map(|f| (*c, f)))
    }

    pub fn detection_count(&self) -> usize {
        self.detections.iter().filter(|d| **d).count()
    }
}
