//! The command-line workflows end to end, through `main_with`.

use std::path::Path;

use aidedex::cli::{load_report, main_with, EXIT_CONFIG, EXIT_INCOMPLETE, EXIT_OK};
use aidedex::engine::{replay, EventLog};
use aidedex::mission::MetricsReport;
use aidedex::world::load_scenario;

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("aidedex").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn metrics(dir: &Path) -> MetricsReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn generate_then_run_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("s.toml");
    assert_eq!(cli(&["generate", "--size", "24x20", "--threats", "4", "--seed", "5", "--mode", "mns", "-o", p(&scen)]), EXIT_OK);
    let s = load_scenario(&scen).unwrap();
    assert_eq!((s.grid.width(), s.grid.height(), s.threats.len(), s.seed), (24, 20, 4, 5));

    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cli(&["run", "--scenario", p(&scen), "-o", p(&a)]), EXIT_OK);
    assert_eq!(cli(&["run", "--scenario", p(&scen), "--mode", "centralized", "-o", p(&b)]), EXIT_OK);
    for f in ["events.jsonl", "metrics.json", "heatmap.csv", "candidates.csv"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let (ma, mb) = (metrics(&a), metrics(&b));
    assert_eq!((ma.mode.as_str(), mb.mode.as_str()), ("mns", "centralized"));
    assert_eq!(ma.outcome, "complete");

    // the heatmap export is one row per grid row
    let heat = std::fs::read_to_string(a.join("heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 20);
    for line in heat.lines() {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row.len(), 24);
        assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    assert_eq!(cli(&["compare", p(&a), p(&b)]), EXIT_OK);
    assert_eq!(cli(&["compare", p(&a.join("metrics.json")), p(&b), "--json"]), EXIT_OK);
    assert_eq!(load_report(&a).unwrap(), ma);
}

#[test]
fn same_scenario_same_seed_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(cli(&["run", "--size", "20x20", "--threats", "3", "--seed", "9", "--mode", "mns", "-o", p(d)]), EXIT_OK);
    }
    for f in ["events.jsonl", "metrics.json", "heatmap.csv", "candidates.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_batches_write_per_seed_dirs_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("batch");
    assert_eq!(cli(&["run", "--size", "20x20", "--threats", "3", "--seeds", "1..3", "-o", p(&out)]), EXIT_OK);
    for seed in 1..=3 {
        assert_eq!(metrics(&out.join(format!("seed-{seed}"))).seed, seed);
    }
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 4);
    assert!(agg.lines().next().unwrap().starts_with("seed,"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("coverage,")));
}

#[test]
fn event_logs_replay_to_the_written_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let faults = tmp.path().join("faults.toml");
    std::fs::write(
        &faults,
        "[[fault]]\nkind = \"robot_failure\"\nrobot = \"SUAV-2\"\ntick = 60\n\n[[fault]]\nkind = \"comms_blackout\"\nstart = 80\nend = 200\nnodes = [\"centre\"]\n",
    )
    .unwrap();
    for mode in ["centralized", "mns"] {
        let out = tmp.path().join(mode);
        let code = cli(&["run", "--size", "24x24", "--threats", "4", "--seed", "4", "--mode", mode, "--faults", p(&faults), "-o", p(&out)]);
        assert!(code == EXIT_OK || code == EXIT_INCOMPLETE);
        let text = std::fs::read_to_string(out.join("events.jsonl")).unwrap();
        assert_eq!(replay(&text).unwrap(), metrics(&out), "{mode}");
        let log = EventLog::parse(&text).unwrap();
        assert_eq!(log.header.mode, mode);
        assert_eq!(metrics(&out).robots_failed, 1);
    }
}

#[test]
fn headless_supervised_runs_stop_at_the_first_gate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sup");
    let code = cli(&["run", "--size", "16x16", "--threats", "2", "--seed", "1", "--supervised", "--max-ticks", "300", "-o", p(&out)]);
    assert_eq!(code, EXIT_INCOMPLETE);
    let m = metrics(&out);
    assert_eq!(m.outcome, "incomplete");
    assert_eq!(m.ticks, 300);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("s.toml");
    assert_eq!(cli(&["generate", "--size", "10x10", "-o", p(&scen)]), EXIT_OK);
    let out = tmp.path().join("x");
    assert_eq!(cli(&["run", "--scenario", p(&scen), "--size", "10x10", "-o", p(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["run", "--scenario", p(&tmp.path().join("missing.toml")), "-o", p(&out)]), EXIT_CONFIG);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[[fault]]\nkind = \"meteor\"\n").unwrap();
    assert_eq!(cli(&["run", "--size", "10x10", "--faults", p(&bad), "-o", p(&out)]), EXIT_CONFIG);
    std::fs::write(&bad, "[[fault]]\nkind = \"robot_failure\"\nrobot = \"TANK-9\"\ntick = 3\n").unwrap();
    assert_eq!(cli(&["run", "--size", "10x10", "--faults", p(&bad), "-o", p(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["run", "--seed", "1", "--seeds", "1..2", "-o", p(&out)]), EXIT_CONFIG);
    assert_eq!(cli(&["compare", p(&tmp.path().join("nope")), p(&out)]), EXIT_CONFIG);
}
