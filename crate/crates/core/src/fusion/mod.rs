//! Evidence fusion: per-cell log-odds heatmap, candidate extraction and classification.
//!
//! Readings are treated as conditionally independent given the cell's state,
//! so each one adds a fixed log-likelihood ratio to every cell it covers.
//! The ratios are quantized to a fixed-point grid before they are added; the
//! heatmap is then a sum of integers and comes out bit-identical whatever the
//! order readings arrive in.

mod calibration;
mod candidate;
mod export;
mod heatmap;
pub mod oracle;

pub use calibration::{calibration_harness, CalibrationConfig, CalibrationReport, ReliabilityBin};
pub use candidate::{extract_candidates, find_blobs, priority_score, Blob, Candidate, CandidateStatus, PriorityWeights};
pub use export::{candidates_csv, heatmap_csv};
pub use heatmap::{logit, sigmoid, FusionModels, ThreatHeatmap, LOG_ODDS_SCALE, PRIOR_EPS};

use thiserror::Error;

use crate::sensors::SensorError;
use crate::world::CellIndex;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("reading covers cell {cell} outside the {len}-cell heatmap")]
    OutOfBounds { cell: CellIndex, len: usize },
    #[error("candidate at cell {cell} cannot go from {from:?} to {to:?}")]
    InvalidTransition { cell: CellIndex, from: CandidateStatus, to: CandidateStatus },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}
