//! Fires each detector many times over a known threat and over clutter and
//! compares the empirical hit rates with the model.

use aidedex::engine::{rng_stream, StreamPurpose};
use aidedex::sensors::{scan, LocalizationNoise, ReadingId, ScanTarget, SensorKind, SensorTable};
use aidedex::world::{Terrain, Threat, ThreatId, ThreatProfiles, WorldGrid};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let table = SensorTable::default();
    let profiles = ThreatProfiles::default();
    let grid = WorldGrid::uniform(3, 3, Terrain::Sand).unwrap();
    let centre = grid.index_of(1, 1).unwrap();
    let pose = (1.5 * grid.cell_size(), 1.5 * grid.cell_size());
    let mut rng = rng_stream(11, 0, StreamPurpose::Scan);
    let threat = Threat { id: ThreatId(0), cell: centre, ..profiles.sample(ThreatId(0), centre, &mut rng) };
    let threats = [threat.clone()];
    let mut at = vec![None; grid.len()];
    at[centre] = Some(0);
    let target = ScanTarget { grid: &grid, threats: &threats, threat_at: &at };
    let empty = ScanTarget { grid: &grid, threats: &[], threat_at: &vec![None; grid.len()] };

    println!("threat: {:?}, depth {:.2} m, metal {:.2}; {n} scans each", threat.class, threat.depth, threat.metal_fraction);
    println!("{:<14} {:>8} {:>8} {:>8} {:>8}", "sensor", "p_det", "seen", "p_fp", "seen");
    for kind in SensorKind::ALL {
        let Some(model) = table.get(kind) else { continue };
        let (mut hit, mut fp) = (0, 0);
        for k in 0..n {
            let id = ReadingId { robot: 0, seq: k as u32 };
            let r = scan(model, pose, &LocalizationNoise::NONE, target, &mut rng, id, 0);
            hit += r.cells.iter().zip(&r.detections).any(|(&c, &d)| c == centre && d) as usize;
            let r = scan(model, pose, &LocalizationNoise::NONE, empty, &mut rng, id, 0);
            fp += r.cells.iter().zip(&r.detections).any(|(&c, &d)| c == centre && d) as usize;
        }
        println!(
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            format!("{kind:?}"),
            model.p_det(&threat),
            hit as f64 / n as f64,
            model.p_fp,
            fp as f64 / n as f64
        );
    }
}
