use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RobotView, TaskId};
use crate::fleet::{distance_field, RobotId, RobotKind};
use crate::sensors::footprint;
use crate::world::{traversable, CellIndex, WorldGrid};

/// A square tile of the grid used for exploration and sweep tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: u32,
    pub x0: u32,
    pub y0: u32,
    /// Exclusive.
    pub x1: u32,
    pub y1: u32,
    /// Reachable cells inside the tile.
    pub cells: Vec<CellIndex>,
}

impl Region {
    /// Tiles the grid row-major, keeping tiles with at least one reachable cell.
    pub fn tile(grid: &WorldGrid, size: u32, reachable: &[bool]) -> Vec<Region> {
        let size = size.max(1);
        let mut out = Vec::new();
        for y0 in (0..grid.height()).step_by(size as usize) {
            for x0 in (0..grid.width()).step_by(size as usize) {
                let (x1, y1) = ((x0 + size).min(grid.width()), (y0 + size).min(grid.height()));
                let mut cells = Vec::new();
                for y in y0..y1 {
                    for x in x0..x1 {
                        let c = (y * grid.width() + x) as CellIndex;
                        if reachable[c] {
                            cells.push(c);
                        }
                    }
                }
                if !cells.is_empty() {
                    out.push(Region { index: out.len() as u32, x0, y0, x1, y1, cells });
                }
            }
        }
        out
    }
}

fn lanes(y0: u32, y1: u32, first: u32, step: u32, radius: u32) -> Vec<u32> {
    let mut ys = Vec::new();
    let mut y = y0 + first.min(y1 - y0 - 1);
    while y < y1 {
        ys.push(y);
        y += step.max(1);
    }
    if let Some(&last) = ys.last() {
        if last + radius < y1 - 1 {
            ys.push(y1 - 1);
        }
    }
    ys
}

/// Boustrophedon scan points over a region.
///
/// Lanes start `first` rows into the tile and repeat every `step` rows; a final
/// lane is added if the last one leaves rows beyond `radius` uncovered. Cells
/// the robot kind cannot occupy are skipped.
pub fn region_waypoints(grid: &WorldGrid, region: &Region, kind: RobotKind, first: u32, step: u32, radius: u32) -> Vec<CellIndex> {
    let mut out = Vec::new();
    for (i, y) in lanes(region.y0, region.y1, first, step, radius).into_iter().enumerate() {
        let xs: Vec<u32> = if i % 2 == 0 { (region.x0..region.x1).collect() } else { (region.x0..region.x1).rev().collect() };
        for x in xs {
            let c = (y * grid.width() + x) as CellIndex;
            if traversable(grid, c, kind).unwrap_or(false) {
                out.push(c);
            }
        }
    }
    out
}

/// Scan points that see the region's cells `covered` marks as unseen.
///
/// Greedy: each unseen cell in turn, if still unseen, gets the occupiable cell
/// within `radius` whose footprint sees the most unseen cells. The points are
/// then chained nearest-first from the first one.
pub fn gap_waypoints(grid: &WorldGrid, region: &Region, kind: RobotKind, radius: u32, covered: &[bool]) -> Vec<CellIndex> {
    let r = radius as f64;
    let mut seen = covered.to_vec();
    let mut picks = Vec::new();
    for &u in &region.cells {
        if seen[u] {
            continue;
        }
        let gain = |c: CellIndex| footprint(grid, c, r).into_iter().filter(|&f| !seen[f]).count();
        let best = footprint(grid, u, r)
            .into_iter()
            .filter(|&c| traversable(grid, c, kind).unwrap_or(false))
            .map(|c| (gain(c), c))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some((_, c)) = best else {
            seen[u] = true;
            continue;
        };
        for f in footprint(grid, c, r) {
            seen[f] = true;
        }
        picks.push(c);
    }
    let mut out = Vec::with_capacity(picks.len());
    if picks.is_empty() {
        return out;
    }
    out.push(picks.remove(0));
    while !picks.is_empty() {
        let (lx, ly) = grid.coords(*out.last().unwrap());
        let d = |c: &CellIndex| {
            let (x, y) = grid.coords(*c);
            x.abs_diff(lx).max(y.abs_diff(ly))
        };
        let i = (0..picks.len()).min_by_key(|&i| (d(&picks[i]), picks[i])).unwrap();
        out.push(picks.remove(i));
    }
    out
}

/// One pending task offered to the allocator.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRequest {
    pub task: TaskId,
    pub priority: f64,
    /// Where the robot has to get to first.
    pub start: CellIndex,
}

/// Greedy assignment: tasks by descending priority (task id on ties), each to
/// the nearest eligible robot by path distance (robot id on ties).
///
/// `robots` are the idle candidates; each receives at most one task. Tasks
/// nobody can reach stay unassigned.
pub fn allocate_tasks(grid: &WorldGrid, requests: &[AllocationRequest], robots: &[RobotView]) -> Vec<(TaskId, RobotId)> {
    let mut order: Vec<&AllocationRequest> = requests.iter().collect();
    order.sort_by(|a, b| b.priority.partial_cmp(&a.priority).unwrap_or(Ordering::Equal).then(a.task.cmp(&b.task)));
    let mut free: Vec<&RobotView> = robots.iter().collect();
    free.sort_by_key(|r| r.id);
    let mut fields: BTreeMap<RobotId, Vec<Option<u32>>> = BTreeMap::new();
    let mut out = Vec::new();
    for req in order {
        if free.is_empty() {
            break;
        }
        let mut best: Option<(u32, usize)> = None;
        for (i, r) in free.iter().enumerate() {
            if !req.task.kind.eligible(r.kind) {
                continue;
            }
            let field = fields.entry(r.id).or_insert_with(|| distance_field(grid, r.cell, r.kind));
            if let Some(d) = field[req.start] {
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        }
        if let Some((_, i)) = best {
            out.push((req.task, free.remove(i).id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::TaskKind;
    use crate::world::Terrain;

    fn view(id: RobotId, kind: RobotKind, cell: CellIndex) -> RobotView {
        RobotView { id, kind, cell, battery_s: 100.0, alive: true, task: None, returning: false, status_tick: 0 }
    }

    fn req(kind: TaskKind, target: u32, priority: f64, start: CellIndex) -> AllocationRequest {
        AllocationRequest { task: TaskId::new(kind, target, 0, 0), priority, start }
    }

    #[test]
    fn lanes_cover_every_row() {
        for (h, first, step, r) in [(10, 2, 5, 2), (10, 0, 2, 1), (7, 2, 5, 2), (3, 2, 5, 2), (1, 2, 5, 2)] {
            let ys = lanes(0, h, first, step, r);
            for y in 0..h {
                assert!(ys.iter().any(|l| l.abs_diff(y) <= r), "row {y} of {h} uncovered by {ys:?}");
            }
        }
    }

    #[test]
    fn tiles_skip_unreachable() {
        let g = WorldGrid::uniform(25, 10, Terrain::Sand).unwrap();
        let mut reach = vec![true; g.len()];
        for y in 0..10 {
            for x in 20..25 {
                reach[y * 25 + x] = false;
            }
        }
        let regions = Region::tile(&g, 10, &reach);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[1].x1, 20);
        assert_eq!(regions[1].cells.len(), 100);
    }

    #[test]
    fn gap_points_see_every_gap() {
        let g = WorldGrid::uniform(10, 10, Terrain::Sand).unwrap();
        let reach = vec![true; g.len()];
        let region = Region::tile(&g, 10, &reach).remove(0);
        let mut covered = vec![true; g.len()];
        for c in [0, 1, 11, 55, 56, 99] {
            covered[c] = false;
        }
        let pts = gap_waypoints(&g, &region, RobotKind::Suav, 1, &covered);
        for c in [0, 1, 11, 55, 56, 99] {
            assert!(pts.iter().any(|&p| footprint(&g, p, 1.0).contains(&c)), "{c} unseen by {pts:?}");
        }
        assert!(pts.len() <= 3, "{pts:?}");
        assert!(gap_waypoints(&g, &region, RobotKind::Suav, 1, &vec![true; g.len()]).is_empty());
    }

    #[test]
    fn boustrophedon_alternates() {
        let g = WorldGrid::uniform(10, 10, Terrain::Sand).unwrap();
        let region = Region::tile(&g, 10, &[true; 100]).remove(0);
        let wps = region_waypoints(&g, &region, RobotKind::Suav, 2, 5, 2);
        assert_eq!(wps.len(), 20);
        assert_eq!(wps[0], 20);
        assert_eq!(wps[9], 29);
        assert_eq!(wps[10], 79);
        assert_eq!(wps[19], 70);
    }

    #[test]
    fn greedy_nearest_with_tie_breaks() {
        let g = WorldGrid::uniform(10, 10, Terrain::Sand).unwrap();
        let robots = [view(4, RobotKind::Sugv, 0), view(5, RobotKind::Sugv, 9), view(1, RobotKind::Suav, 0)];
        let reqs = [req(TaskKind::EmiScan, 8, 1.0, 8), req(TaskKind::EmiScan, 1, 2.0, 1), req(TaskKind::ExploreRegion, 0, 0.5, 50)];
        let out = allocate_tasks(&g, &reqs, &robots);
        assert_eq!(
            out,
            vec![
                (reqs[1].task, 4), // higher priority first, SUGV-1 is nearer
                (reqs[0].task, 5),
                (reqs[2].task, 1),
            ]
        );
        // equal distance → lower robot id
        let robots = [view(5, RobotKind::Sugv, 0), view(4, RobotKind::Sugv, 0)];
        let out = allocate_tasks(&g, &[req(TaskKind::EmiScan, 55, 1.0, 55)], &robots);
        assert_eq!(out[0].1, 4);
        // equal priority → lower task id
        let robots = [view(4, RobotKind::Sugv, 0)];
        let out = allocate_tasks(&g, &[req(TaskKind::EmiScan, 9, 1.0, 9), req(TaskKind::EmiScan, 3, 1.0, 3)], &robots);
        assert_eq!(out[0].0.target, 3);
    }

    #[test]
    fn ineligible_robots_get_nothing() {
        let g = WorldGrid::uniform(5, 5, Terrain::Sand).unwrap();
        let out = allocate_tasks(&g, &[req(TaskKind::ConfirmCandidate, 3, 1.0, 3)], &[view(4, RobotKind::Sugv, 0)]);
        assert!(out.is_empty());
    }
}
