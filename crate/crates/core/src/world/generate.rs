use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::threat::pick_weighted;
use super::{Cell, ControllerMode, Scenario, Terrain, TerrainPriors, ThreatId, ThreatProfiles, WorldError, WorldGrid};
use crate::engine::{rng_stream, StreamPurpose};
use crate::fleet::FleetConfig;
use crate::mission::MissionConfig;
use crate::netsim::NetConfig;

const TERRAIN_BLOCK: u32 = 8;
const TERRAIN_WEIGHTS: [f64; 5] = [0.3, 0.2, 0.2, 0.15, 0.15];
const MAX_GRID_SIDE: u32 = 4096;

/// Inputs to [`generate_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub width: u32,
    pub height: u32,
    pub threat_count: usize,
    /// Target fraction of cells inside buildings, in [0, 0.9].
    pub indoor_fraction: f64,
    /// Probability that an outdoor cell is an obstacle, in [0, 1].
    pub obstacle_density: f64,
    pub controller_mode: ControllerMode,
    pub terrain_priors: TerrainPriors,
    pub fleet: FleetConfig,
    pub net: NetConfig,
    pub mission: MissionConfig,
    pub profiles: ThreatProfiles,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            width: 50,
            height: 50,
            threat_count: 10,
            indoor_fraction: 0.1,
            obstacle_density: 0.05,
            controller_mode: ControllerMode::Centralized,
            terrain_priors: TerrainPriors::default(),
            fleet: FleetConfig::default(),
            net: NetConfig::default(),
            mission: MissionConfig::default(),
            profiles: ThreatProfiles::default(),
        }
    }
}

impl ScenarioParams {
    pub fn sized(width: u32, height: u32, threat_count: usize) -> Self {
        ScenarioParams { width, height, threat_count, ..Default::default() }
    }

    fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidParams(m));
        if self.width == 0 || self.height == 0 || self.width > MAX_GRID_SIDE || self.height > MAX_GRID_SIDE {
            return bad(format!("grid sides must be in 1..={MAX_GRID_SIDE}, got {}x{}", self.width, self.height));
        }
        if !(0.0..=0.9).contains(&self.indoor_fraction) {
            return bad(format!("indoor_fraction {} outside [0, 0.9]", self.indoor_fraction));
        }
        if !(0.0..=1.0).contains(&self.obstacle_density) {
            return bad(format!("obstacle_density {} outside [0, 1]", self.obstacle_density));
        }
        self.terrain_priors.validate().map_err(WorldError::InvalidParams)?;
        self.profiles.validate().map_err(WorldError::InvalidParams)?;
        Ok(())
    }
}

/// Builds a scenario as a pure function of `(params, seed)`.
pub fn generate_scenario(params: &ScenarioParams, seed: u64) -> Result<Scenario, WorldError> {
    params.validate()?;
    let mut rng = rng_stream(seed, 0, StreamPurpose::Placement);
    let (w, h) = (params.width, params.height);
    let deploy = [1.min(w - 1), 1.min(h - 1)];
    let deploy_idx = (deploy[1] * w + deploy[0]) as usize;
    let priors = &params.terrain_priors;

    // terrain patches
    let bw = w.div_ceil(TERRAIN_BLOCK) as usize;
    let bh = h.div_ceil(TERRAIN_BLOCK) as usize;
    let blocks: Vec<Terrain> = (0..bw * bh).map(|_| Terrain::ALL[pick_weighted(&TERRAIN_WEIGHTS, &mut rng)]).collect();
    let mut cells: Vec<Cell> = (0..(w * h) as usize)
        .map(|i| {
            let (x, y) = ((i as u32 % w) / TERRAIN_BLOCK, (i as u32 / w) / TERRAIN_BLOCK);
            Cell::new(blocks[y as usize * bw + x as usize], false, false, priors)
        })
        .collect();

    let near_deploy = |i: usize| {
        let (x, y) = (i as u32 % w, i as u32 / w);
        x.abs_diff(deploy[0]) <= 2 && y.abs_diff(deploy[1]) <= 2
    };
    let mut protected = vec![false; cells.len()];

    // buildings: walled rectangles with a single door
    let target_indoor = (params.indoor_fraction * (w * h) as f64).round() as usize;
    let mut indoor = 0usize;
    let mut attempts = 0;
    while indoor < target_indoor && attempts < 400 && w >= 5 && h >= 5 {
        attempts += 1;
        let bw_ = rng.gen_range(5..=12.min(w));
        let bh_ = rng.gen_range(5..=12.min(h));
        let x0 = rng.gen_range(0..=w - bw_);
        let y0 = rng.gen_range(0..=h - bh_);
        let footprint = |f: &mut dyn FnMut(u32, u32) -> bool| {
            for y in y0.saturating_sub(1)..(y0 + bh_ + 1).min(h) {
                for x in x0.saturating_sub(1)..(x0 + bw_ + 1).min(w) {
                    if !f(x, y) {
                        return false;
                    }
                }
            }
            true
        };
        let clear = footprint(&mut |x, y| {
            let i = (y * w + x) as usize;
            !cells[i].indoor && !near_deploy(i)
        });
        if !clear {
            continue;
        }
        let mut perimeter = Vec::new();
        for y in y0..y0 + bh_ {
            for x in x0..x0 + bw_ {
                let i = (y * w + x) as usize;
                let edge = x == x0 || y == y0 || x == x0 + bw_ - 1 || y == y0 + bh_ - 1;
                cells[i] = Cell::new(Terrain::Concrete, true, edge, priors);
                let corner = (x == x0 || x == x0 + bw_ - 1) && (y == y0 || y == y0 + bh_ - 1);
                if edge && !corner {
                    perimeter.push((x, y));
                }
                indoor += 1;
            }
        }
        let &(dx, dy) = perimeter.choose(&mut rng).expect("building has a perimeter");
        let door = (dy * w + dx) as usize;
        cells[door].obstacle = false;
        // keep the approach to the door clear
        let (ox, oy) = if dx == x0 {
            (dx as i64 - 1, dy as i64)
        } else if dx == x0 + bw_ - 1 {
            (dx as i64 + 1, dy as i64)
        } else if dy == y0 {
            (dx as i64, dy as i64 - 1)
        } else {
            (dx as i64, dy as i64 + 1)
        };
        if ox >= 0 && oy >= 0 && (ox as u32) < w && (oy as u32) < h {
            protected[(oy as u32 * w + ox as u32) as usize] = true;
        }
    }

    // scattered outdoor obstacles
    let full = params.obstacle_density >= 1.0;
    for i in 0..cells.len() {
        let roll = rng.gen::<f64>();
        if cells[i].indoor || protected[i] || (near_deploy(i) && !full) {
            continue;
        }
        if roll < params.obstacle_density {
            cells[i].obstacle = true;
        }
    }
    if full {
        for c in cells.iter_mut() {
            c.obstacle = true;
        }
    }

    // free space must be one ground-connected region around the deployment zone
    if !cells[deploy_idx].obstacle {
        let reach = ground_reach(&cells, w, h, deploy_idx);
        for (c, r) in cells.iter_mut().zip(&reach) {
            if !*r {
                c.obstacle = true;
            }
        }
    }

    let grid = WorldGrid::from_cells(w, h, cells, priors.clone())?;
    let free: Vec<usize> = (0..grid.len()).filter(|&i| !grid.cell(i).obstacle).collect();
    if params.threat_count > free.len() {
        return Err(WorldError::InfeasiblePlacement { requested: params.threat_count, available: free.len() });
    }
    let mut pool = free;
    let (chosen, _) = pool.partial_shuffle(&mut rng, params.threat_count);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    let threats = chosen
        .into_iter()
        .enumerate()
        .map(|(k, cell)| params.profiles.sample(ThreatId(k as u32 + 1), cell, &mut rng))
        .collect();

    let mut fleet_config = params.fleet.clone();
    fleet_config.deploy_cell = deploy;
    let mut net_config = params.net.clone();
    net_config.command_centre_pos = [deploy[0] as f64 + 0.5, deploy[1] as f64 + 0.5];

    let scenario = Scenario {
        grid,
        threats,
        fleet_config,
        net_config,
        mission_config: params.mission.clone(),
        threat_profiles: params.profiles.clone(),
        seed,
        controller_mode: params.controller_mode,
    };
    Ok(scenario)
}

fn ground_reach(cells: &[Cell], w: u32, h: u32, start: usize) -> Vec<bool> {
    let mut seen = vec![false; cells.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i as u32 % w) as i64, (i as u32 / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = (ny as u32 * w + nx as u32) as usize;
                if !seen[j] && !cells[j].obstacle {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::scenario_to_string;

    #[test]
    fn places_exact_count_on_free_distinct_cells() {
        let s = generate_scenario(&ScenarioParams::sized(50, 50, 10), 1).unwrap();
        assert_eq!(s.threats.len(), 10);
        let mut cells: Vec<_> = s.threats.iter().map(|t| t.cell).collect();
        cells.dedup();
        assert_eq!(cells.len(), 10);
        assert!(s.threats.iter().all(|t| !s.grid.cell(t.cell).obstacle));
        s.validate().unwrap();
    }

    #[test]
    fn all_obstacle_grid_is_infeasible() {
        let params = ScenarioParams { obstacle_density: 1.0, indoor_fraction: 0.0, ..ScenarioParams::sized(2, 2, 1) };
        match generate_scenario(&params, 7) {
            Err(WorldError::InfeasiblePlacement { requested: 1, available: 0 }) => {}
            other => panic!("expected InfeasiblePlacement, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = ScenarioParams::sized(50, 50, 10);
        let a = scenario_to_string(&generate_scenario(&p, 1).unwrap());
        let b = scenario_to_string(&generate_scenario(&p, 1).unwrap());
        assert_eq!(a, b);
        let c = scenario_to_string(&generate_scenario(&p, 2).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn free_space_is_ground_connected() {
        for seed in 0..20 {
            let params = ScenarioParams { obstacle_density: 0.25, indoor_fraction: 0.3, ..Default::default() };
            let s = generate_scenario(&params, seed).unwrap();
            let d = s.fleet_config.deploy_cell;
            let start = (d[1] * s.grid.width() + d[0]) as usize;
            let reach = ground_reach(s.grid.cells(), s.grid.width(), s.grid.height(), start);
            for (i, r) in reach.iter().enumerate() {
                assert_eq!(*r, !s.grid.cell(i).obstacle, "seed {seed} cell {i}");
            }
        }
    }

    #[test]
    fn rejects_out_of_range_params() {
        let p = ScenarioParams { indoor_fraction: 0.95, ..Default::default() };
        assert!(matches!(generate_scenario(&p, 0), Err(WorldError::InvalidParams(_))));
        let p = ScenarioParams::sized(0, 4, 0);
        assert!(matches!(generate_scenario(&p, 0), Err(WorldError::InvalidParams(_))));
    }
}
