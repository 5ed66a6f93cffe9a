use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{FleetError, RobotKind};
use crate::world::{traversable, CellIndex, WorldGrid};

fn passable(grid: &WorldGrid, cell: CellIndex, kind: RobotKind) -> bool {
    traversable(grid, cell, kind).unwrap_or(false)
}

/// Shortest 8-connected path (every step costs one), endpoints included.
///
/// A* with the Chebyshev heuristic. The open set is ordered by
/// `(f, cell index)`, so among equally good frontier cells the one with the
/// lower row, then lower column, is expanded first.
pub fn plan_path(grid: &WorldGrid, from: CellIndex, to: CellIndex, kind: RobotKind) -> Result<Vec<CellIndex>, FleetError> {
    for c in [from, to] {
        if grid.check_index(c).is_err() || !passable(grid, c, kind) {
            return Err(FleetError::NotTraversable { cell: c, kind });
        }
    }
    if from == to {
        return Ok(vec![from]);
    }
    let h = |c: CellIndex| grid.chebyshev(c, to);
    let mut g = vec![u32::MAX; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g[from] = 0;
    open.push(Reverse((h(from), from)));
    while let Some(Reverse((_, cell))) = open.pop() {
        if closed[cell] {
            continue;
        }
        if cell == to {
            let mut path = vec![to];
            let mut c = to;
            while c != from {
                c = parent[c];
                path.push(c);
            }
            path.reverse();
            return Ok(path);
        }
        closed[cell] = true;
        let next_g = g[cell] + 1;
        for n in grid.neighbors8(cell) {
            if closed[n] || !passable(grid, n, kind) || next_g >= g[n] {
                continue;
            }
            g[n] = next_g;
            parent[n] = cell;
            open.push(Reverse((next_g + h(n), n)));
        }
    }
    Err(FleetError::Unreachable { from, to, kind })
}

/// Step distance from `from` to every cell (`None` if unreachable).
pub fn distance_field(grid: &WorldGrid, from: CellIndex, kind: RobotKind) -> Vec<Option<u32>> {
    let mut dist = vec![None; grid.len()];
    if grid.check_index(from).is_err() || !passable(grid, from, kind) {
        return dist;
    }
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c].unwrap() + 1;
        for n in grid.neighbors8(c) {
            if dist[n].is_none() && passable(grid, n, kind) {
                dist[n] = Some(d);
                queue.push_back(n);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Cell, Terrain, TerrainPriors};

    fn grid_from(rows: &[&str]) -> WorldGrid {
        let p = TerrainPriors::default();
        let cells = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| Cell::new(Terrain::Sand, c == 'W' || c == 'w', c == '#' || c == 'W', &p)))
            .collect();
        WorldGrid::from_cells(rows[0].len() as u32, rows.len() as u32, cells, p).unwrap()
    }

    #[test]
    fn straight_line() {
        let g = grid_from(&["....."]);
        assert_eq!(plan_path(&g, 0, 4, RobotKind::Sugv).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn enclosed_target() {
        let g = grid_from(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        assert!(matches!(plan_path(&g, 0, 12, RobotKind::Sugv), Err(FleetError::Unreachable { .. })));
        let p = plan_path(&g, 0, 12, RobotKind::Suav).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn indoor_walls_block_aircraft() {
        let g = grid_from(&[".....", ".WWW.", ".WwW.", ".WWW.", "....."]);
        assert!(plan_path(&g, 0, 12, RobotKind::Luav).is_err());
        let door = grid_from(&[".....", ".WwW.", ".WwW.", ".WWW.", "....."]);
        assert_eq!(plan_path(&door, 0, 12, RobotKind::Luav).unwrap().len(), 4);
    }

    #[test]
    fn path_steps_are_adjacent_and_passable() {
        let g = grid_from(&["..#....", "..#.##.", "....#..", "###.#.#", "......."]);
        let p = plan_path(&g, 0, 6, RobotKind::Sugv).unwrap();
        for w in p.windows(2) {
            assert_eq!(g.chebyshev(w[0], w[1]), 1);
        }
        assert!(p.iter().all(|c| !g.cell(*c).obstacle));
        assert_eq!(p.len() as u32 - 1, distance_field(&g, 0, RobotKind::Sugv)[6].unwrap());
    }

    #[test]
    fn deterministic() {
        let g = grid_from(&["........", "........", "........"]);
        let a = plan_path(&g, 0, 23, RobotKind::Sugv).unwrap();
        assert_eq!(a, plan_path(&g, 0, 23, RobotKind::Sugv).unwrap());
    }
}
