//! Runs the same scenario under both controllers with the command centre
//! blacked out and a ground robot lost mid-mission.

use aidedex::engine::{run, Fault, FaultSchedule, RunOptions};
use aidedex::world::{generate_scenario, ControllerMode, ScenarioParams};

fn main() {
    let faults = FaultSchedule::default()
        .push(Fault::CommsBlackout { start: 100, end: None, nodes: vec!["centre".into()], region: None, links: vec![] })
        .push(Fault::RobotFailure { robot: "SUGV-1".into(), tick: 300 })
        .push(Fault::JammingSpike { p_loss: 0.3, start: 400, end: Some(600) });
    println!("fault file:\n{}", faults.to_toml());
    for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
        let params = ScenarioParams { controller_mode: mode, ..ScenarioParams::sized(30, 30, 6) };
        let s = generate_scenario(&params, 8).expect("scenario");
        let r = run(&s, RunOptions { faults: faults.clone(), max_ticks: 3000, ..Default::default() }).expect("run");
        let m = &r.metrics;
        println!(
            "{:>11}: {} phase={} ticks={} coverage={:.3} recall={:?} failed={} lost={}",
            mode.to_string(),
            m.outcome,
            m.phase_reached,
            m.ticks,
            m.coverage,
            m.recall,
            m.robots_failed,
            m.messages.lost
        );
    }
}
