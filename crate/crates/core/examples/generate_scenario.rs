//! Generates a scenario, writes it as TOML and reads it back.
//!
//! `cargo run --example generate_scenario -- [seed] [out.toml]`

use aidedex::world::{generate_scenario, load_scenario, save_scenario, ScenarioParams, Terrain};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let path = args.next().unwrap_or_else(|| std::env::temp_dir().join(format!("aidedex-scenario-{seed}.toml")).display().to_string());

    let params = ScenarioParams { indoor_fraction: 0.15, ..ScenarioParams::sized(40, 30, 8) };
    let s = generate_scenario(&params, seed).expect("scenario");
    save_scenario(&s, &path).expect("write");
    let back = load_scenario(&path).expect("read back");
    assert_eq!(back, s);

    let g = &s.grid;
    let mut counts = std::collections::BTreeMap::<Terrain, usize>::new();
    let (mut indoor, mut blocked) = (0, 0);
    for i in 0..g.len() {
        let c = g.cell(i);
        *counts.entry(c.terrain).or_default() += 1;
        indoor += c.indoor as usize;
        blocked += c.obstacle as usize;
    }
    println!("{}x{} grid, {} cells indoor, {} obstacles -> {path}", g.width(), g.height(), indoor, blocked);
    for (t, n) in counts {
        println!("  {t:?}: {n}");
    }
    for t in &s.threats {
        let (x, y) = g.coords(t.cell);
        println!("  threat {:>2} at ({x:>2},{y:>2}) {:?} depth {:.2} m metal {:.2}", t.id.0, t.class, t.depth, t.metal_fraction);
    }
}
