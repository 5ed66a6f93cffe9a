//! Plans paths for an aerial and a ground robot on a generated map and draws them.

use aidedex::fleet::{distance_field, plan_path, RobotKind};
use aidedex::world::{generate_scenario, ScenarioParams};

fn main() {
    let params = ScenarioParams { indoor_fraction: 0.2, obstacle_density: 0.12, ..ScenarioParams::sized(40, 20, 0) };
    let s = generate_scenario(&params, 9).expect("scenario");
    let g = &s.grid;
    let [dx, dy] = s.fleet_config.deploy_cell;
    let from = g.index_of(dx as i64, dy as i64).unwrap();
    let to = (0..g.len()).rev().find(|&c| !g.cell(c).obstacle).unwrap();
    for kind in [RobotKind::Suav, RobotKind::Sugv] {
        let field = distance_field(g, from, kind);
        let reach = field.iter().filter(|d| d.is_some()).count();
        match plan_path(g, from, to, kind) {
            Ok(path) => {
                println!("{}: {} steps, {reach} cells reachable", kind.label(), path.len() - 1);
                for y in 0..g.height() {
                    let row: String = (0..g.width())
                        .map(|x| {
                            let c = g.index_of(x as i64, y as i64).unwrap();
                            let cell = g.cell(c);
                            if path.contains(&c) {
                                '*'
                            } else if cell.obstacle {
                                if cell.indoor { '#' } else { 'o' }
                            } else if cell.indoor {
                                ','
                            } else {
                                '.'
                            }
                        })
                        .collect();
                    println!("  {row}");
                }
            }
            Err(e) => println!("{}: {e}", kind.label()),
        }
    }
}
