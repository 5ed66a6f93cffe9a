//! Fuses simulated scans into a log-odds heatmap, prints it as ASCII, writes
//! the CSV export and runs a small calibration study.

use aidedex::engine::{rng_stream, StreamPurpose};
use aidedex::fusion::{calibration_harness, extract_candidates, heatmap_csv, CalibrationConfig, FusionModels, ThreatHeatmap};
use aidedex::sensors::{scan, LocalizationNoise, ReadingId, SensorKind};
use aidedex::world::{generate_scenario, ScenarioParams};
use rand::Rng;

fn main() {
    let s = generate_scenario(&ScenarioParams::sized(30, 20, 5), 3).expect("scenario");
    let table = &s.fleet_config.sensors;
    let models = FusionModels::from_table(table, &s.threat_profiles, None).expect("models");
    let index = s.threat_index();
    let target = aidedex::sensors::ScanTarget { grid: &s.grid, threats: &s.threats, threat_at: &index };
    let mut heat = ThreatHeatmap::for_grid(&s.grid);
    let mut rng = rng_stream(s.seed, 0, StreamPurpose::Scan);
    let (w, h) = (s.grid.width() as f64 * s.grid.cell_size(), s.grid.height() as f64 * s.grid.cell_size());
    let mut seq = 0;
    for kind in [SensorKind::Rgb, SensorKind::Gpr, SensorKind::Emi] {
        let model = table.get(kind).expect("detector");
        for _ in 0..1500 {
            let pose = (rng.gen::<f64>() * w, rng.gen::<f64>() * h);
            if s.grid.cell_at(pose.0, pose.1).is_none_or(|c| s.grid.cell(c).obstacle) {
                continue;
            }
            seq += 1;
            let r = scan(model, pose, &LocalizationNoise::default(), target, &mut rng, ReadingId { robot: 0, seq }, 0);
            heat.integrate_reading(&r, &models).expect("integrate");
        }
    }

    let truth: Vec<usize> = s.threats.iter().map(|t| t.cell).collect();
    for y in 0..heat.height() {
        let row: String = (0..heat.width())
            .map(|x| {
                let c = (y * heat.width() + x) as usize;
                let p = heat.posterior(c);
                let ch = [' ', '.', ':', '+', '#'][((p * 5.0) as usize).min(4)];
                if truth.contains(&c) { 'T' } else { ch }
            })
            .collect();
        println!("|{row}|");
    }
    for c in extract_candidates(&heat, 0.6) {
        let hit = truth.iter().any(|&t| {
            let (a, b) = (s.grid.coords(t), s.grid.coords(c.cell));
            a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
        });
        println!("candidate at {:?} p={:.3} {}", s.grid.coords(c.cell), c.posterior, if hit { "(threat)" } else { "" });
    }
    let csv = std::env::temp_dir().join("aidedex-heatmap.csv");
    std::fs::write(&csv, heatmap_csv(&heat)).expect("write csv");
    println!("heatmap written to {}", csv.display());

    let cfg = CalibrationConfig { min_target_cells: 2000, ..Default::default() };
    let r = calibration_harness(&cfg, table, &s.threat_profiles, 5).expect("calibration");
    println!("\ncalibration over {} runs, {} cells", r.runs, r.cells);
    for b in r.bins.iter().filter(|b| b.cells > 0) {
        println!("  [{:.1}, {:.1})  cells {:>7}  threat frequency {:.3}", b.lo, b.hi, b.cells, b.frequency().unwrap());
    }
}
