//! Runs one generated scenario under both controller modes and prints the
//! headline metrics side by side.

use std::time::Instant;

use aidedex::engine::{run, RunOptions};
use aidedex::world::{generate_scenario, ControllerMode, ScenarioParams};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    for mode in [ControllerMode::Centralized, ControllerMode::Mns] {
        let params = ScenarioParams { controller_mode: mode, ..Default::default() };
        let scenario = generate_scenario(&params, seed).expect("scenario");
        let t0 = Instant::now();
        let r = run(&scenario, RunOptions::default()).expect("run");
        let m = &r.metrics;
        println!(
            "{mode:>11}: {} at tick {} phase={} coverage={:.3} recall={:?} precision={:?} candidates={} sent={} loss={:.3} ({:.2}s)",
            m.outcome,
            m.ticks,
            m.phase_reached,
            m.coverage,
            m.recall,
            m.precision,
            m.candidates,
            m.messages.sent,
            m.messages.loss_rate,
            t0.elapsed().as_secs_f64()
        );
    }
}
