//! Tick loop, fault injection, event log and replay.

mod faults;
mod log;
mod replay;
mod rng;
mod sim;

use thiserror::Error;

pub use faults::{Blackout, Fault, FaultSchedule, Jam, ResolvedFaults};
pub use log::{r9, EventLog, LogHeader, LogRecord, RecordBody, RobotEntry, RobotSnap, ThreatTruth, LOG_FORMAT, LOG_VERSION};
pub use replay::replay;
pub use rng::{rng_stream, StreamPurpose};
pub use sim::{CandidateSnapshot, RobotSnapshot, RunOptions, RunResult, Simulation, StateSnapshot, StepOutcome, SAMPLE_EVERY};

use crate::world::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid fault schedule: {0}")]
    InvalidSchedule(String),
    #[error("incompatible event log: {0}")]
    IncompatibleLog(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Runs a scenario to completion (or `max_ticks`).
pub fn run(scenario: &Scenario, options: RunOptions) -> Result<RunResult, EngineError> {
    let mut sim = Simulation::new(scenario.clone(), options)?;
    sim.run_to_end();
    Ok(sim.into_result())
}
