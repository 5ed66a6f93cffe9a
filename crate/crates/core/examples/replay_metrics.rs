//! Runs a mission, writes its event log and recomputes the metrics from the
//! log alone.

use aidedex::engine::{replay, run, RunOptions};
use aidedex::world::{generate_scenario, ScenarioParams};

fn main() {
    let s = generate_scenario(&ScenarioParams::sized(24, 24, 4), 21).expect("scenario");
    let r = run(&s, RunOptions::default()).expect("run");
    let path = std::env::temp_dir().join("aidedex-events.jsonl");
    r.log.write_to(&path).expect("write log");
    let text = std::fs::read_to_string(&path).expect("read log");
    println!("{} records, hash {}", r.log.records.len(), r.log.hash());
    let again = replay(&text).expect("replay");
    assert_eq!(again, r.metrics);
    println!("replayed metrics match: outcome {} at tick {}, recall {:?}", again.outcome, again.ticks, again.recall);
    for rec in r.log.records.iter().filter(|x| matches!(x.body, aidedex::engine::RecordBody::Phase { .. })) {
        println!("  tick {:>4} node {}: {:?}", rec.tick, rec.node, rec.body);
    }
}
