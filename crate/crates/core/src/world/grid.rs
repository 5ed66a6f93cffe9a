use serde::{Deserialize, Serialize};

use super::WorldError;

/// Row-major cell index: `y * width + x`.
pub type CellIndex = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terrain {
    Sand,
    Gravel,
    Clay,
    Asphalt,
    Concrete,
}

impl Terrain {
    pub const ALL: [Terrain; 5] = [Terrain::Sand, Terrain::Gravel, Terrain::Clay, Terrain::Asphalt, Terrain::Concrete];

    pub(crate) fn code(self) -> char {
        match self {
            Terrain::Sand => 's',
            Terrain::Gravel => 'g',
            Terrain::Clay => 'c',
            Terrain::Asphalt => 'a',
            Terrain::Concrete => 'k',
        }
    }

    pub(crate) fn from_code(c: char) -> Option<Terrain> {
        Some(match c.to_ascii_lowercase() {
            's' => Terrain::Sand,
            'g' => Terrain::Gravel,
            'c' => Terrain::Clay,
            'a' => Terrain::Asphalt,
            'k' => Terrain::Concrete,
            _ => return None,
        })
    }
}

/// Per-terrain prior probability that a cell holds a threat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainPriors {
    pub sand: f64,
    pub gravel: f64,
    pub clay: f64,
    pub asphalt: f64,
    pub concrete: f64,
}

impl Default for TerrainPriors {
    fn default() -> Self {
        // Soft ground is where devices get buried; paved surfaces rarely.
        TerrainPriors { sand: 0.02, gravel: 0.015, clay: 0.02, asphalt: 0.005, concrete: 0.005 }
    }
}

impl TerrainPriors {
    pub fn get(&self, t: Terrain) -> f64 {
        match t {
            Terrain::Sand => self.sand,
            Terrain::Gravel => self.gravel,
            Terrain::Clay => self.clay,
            Terrain::Asphalt => self.asphalt,
            Terrain::Concrete => self.concrete,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for t in Terrain::ALL {
            let p = self.get(t);
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("terrain prior for {t:?} is {p}, outside [0,1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub terrain: Terrain,
    pub indoor: bool,
    pub obstacle: bool,
    pub terrain_prior: f64,
}

impl Cell {
    pub fn new(terrain: Terrain, indoor: bool, obstacle: bool, priors: &TerrainPriors) -> Self {
        Cell { terrain, indoor, obstacle, terrain_prior: priors.get(terrain) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldGrid {
    width: u32,
    height: u32,
    cell_size: f64,
    cells: Vec<Cell>,
    priors: TerrainPriors,
}

impl WorldGrid {
    /// A grid filled with one outdoor terrain.
    pub fn uniform(width: u32, height: u32, terrain: Terrain) -> Result<Self, WorldError> {
        let priors = TerrainPriors::default();
        let cell = Cell::new(terrain, false, false, &priors);
        Self::from_cells(width, height, vec![cell; (width as usize) * (height as usize)], priors)
    }

    pub fn from_cells(width: u32, height: u32, cells: Vec<Cell>, priors: TerrainPriors) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::InvalidParams(format!("grid must be at least 1x1, got {width}x{height}")));
        }
        if cells.len() != width as usize * height as usize {
            return Err(WorldError::InvalidParams(format!(
                "grid {width}x{height} needs {} cells, got {}",
                width as usize * height as usize,
                cells.len()
            )));
        }
        if let Some(c) = cells.iter().find(|c| !(0.0..=1.0).contains(&c.terrain_prior)) {
            return Err(WorldError::InvalidParams(format!("terrain_prior {} outside [0,1]", c.terrain_prior)));
        }
        Ok(WorldGrid { width, height, cell_size: 1.0, cells, priors })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Edge length of one cell in meters.
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn priors(&self) -> &TerrainPriors {
        &self.priors
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, idx: CellIndex) -> &Cell {
        &self.cells[idx]
    }

    pub fn cell_mut(&mut self, idx: CellIndex) -> &mut Cell {
        &mut self.cells[idx]
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn index_of(&self, x: i64, y: i64) -> Result<CellIndex, WorldError> {
        if self.in_bounds(x, y) {
            Ok(y as usize * self.width as usize + x as usize)
        } else {
            Err(WorldError::OutOfBounds { x, y, width: self.width, height: self.height })
        }
    }

    pub fn check_index(&self, idx: CellIndex) -> Result<(), WorldError> {
        if idx < self.cells.len() {
            Ok(())
        } else {
            let (x, y) = (idx % self.width as usize, idx / self.width as usize);
            Err(WorldError::OutOfBounds { x: x as i64, y: y as i64, width: self.width, height: self.height })
        }
    }

    pub fn coords(&self, idx: CellIndex) -> (u32, u32) {
        ((idx % self.width as usize) as u32, (idx / self.width as usize) as u32)
    }

    /// Center of a cell in meters.
    pub fn center(&self, idx: CellIndex) -> (f64, f64) {
        let (x, y) = self.coords(idx);
        ((x as f64 + 0.5) * self.cell_size, (y as f64 + 0.5) * self.cell_size)
    }

    /// Cell containing a metric position, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<CellIndex> {
        let cx = (x / self.cell_size).floor();
        let cy = (y / self.cell_size).floor();
        if cx.is_finite() && cy.is_finite() && self.in_bounds(cx as i64, cy as i64) {
            Some(cy as usize * self.width as usize + cx as usize)
        } else {
            None
        }
    }

    /// 8-connected neighbours in (row, column) order.
    pub fn neighbors8(&self, idx: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (x, y) = self.coords(idx);
        let (x, y) = (x as i64, y as i64);
        const OFFSETS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            self.in_bounds(nx, ny).then(|| ny as usize * self.width as usize + nx as usize)
        })
    }

    /// Chebyshev distance between two cells.
    pub fn chebyshev(&self, a: CellIndex, b: CellIndex) -> u32 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx).max(ay.abs_diff(by))
    }
}
