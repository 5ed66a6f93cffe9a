//! Scenario file: a TOML document. See `docs/scenario-format.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cell, ControllerMode, Scenario, Terrain, TerrainPriors, Threat, ThreatProfiles, WorldError, WorldGrid};
use crate::fleet::FleetConfig;
use crate::mission::MissionConfig;
use crate::netsim::NetConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    seed: Seed,
    controller_mode: ControllerMode,
    grid: GridSection,
    #[serde(default)]
    threats: Vec<Threat>,
    #[serde(default)]
    fleet_config: FleetConfig,
    #[serde(default)]
    net_config: NetConfig,
    #[serde(default)]
    mission_config: MissionConfig,
    #[serde(default)]
    threat_profiles: ThreatProfiles,
}

/// TOML integers are signed; seeds above `i64::MAX` are written as strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Seed {
    Int(i64),
    Text(String),
}

impl Seed {
    fn from_u64(v: u64) -> Seed {
        i64::try_from(v).map(Seed::Int).unwrap_or_else(|_| Seed::Text(v.to_string()))
    }

    fn to_u64(&self) -> Result<u64, String> {
        match self {
            Seed::Int(v) => u64::try_from(*v).map_err(|_| format!("negative seed {v}")),
            Seed::Text(s) => s.parse().map_err(|e| format!("seed `{s}`: {e}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    width: u32,
    height: u32,
    cell_size: f64,
    /// One run-length-encoded string per row, row 0 first.
    rows: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    prior_overrides: Vec<(usize, f64)>,
    #[serde(default)]
    terrain_prior: TerrainPriors,
}

fn cell_code(c: &Cell) -> String {
    let t = c.terrain.code();
    let mut s = String::with_capacity(2);
    s.push(if c.indoor { t.to_ascii_uppercase() } else { t });
    if c.obstacle {
        s.push('#');
    }
    s
}

fn encode_row(cells: &[Cell]) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let code = cell_code(&cells[i]);
        let mut j = i + 1;
        while j < cells.len() && cell_code(&cells[j]) == code {
            j += 1;
        }
        let n = j - i;
        out.push(if n == 1 { code } else { format!("{n}{code}") });
        i = j;
    }
    out.join(" ")
}

fn decode_row(row: &str, width: usize, priors: &TerrainPriors, y: usize) -> Result<Vec<Cell>, WorldError> {
    let err = |m: String| WorldError::Parse { line: None, field: format!("grid.rows[{y}]"), message: m };
    let mut cells = Vec::with_capacity(width);
    for token in row.split_whitespace() {
        let digits: String = token.chars().take_while(|c| c.is_ascii_digit()).collect();
        let rest = &token[digits.len()..];
        let count: usize = if digits.is_empty() { 1 } else { digits.parse().map_err(|_| err(format!("bad run `{token}`")))? };
        let mut chars = rest.chars();
        let code = chars.next().ok_or_else(|| err(format!("run `{token}` has no terrain code")))?;
        let terrain = Terrain::from_code(code).ok_or_else(|| err(format!("unknown terrain code `{code}`")))?;
        let obstacle = match chars.as_str() {
            "" => false,
            "#" => true,
            other => return Err(err(format!("unexpected suffix `{other}` in `{token}`"))),
        };
        let cell = Cell::new(terrain, code.is_ascii_uppercase(), obstacle, priors);
        cells.extend(std::iter::repeat_n(cell, count));
    }
    if cells.len() != width {
        return Err(err(format!("row decodes to {} cells, expected {width}", cells.len())));
    }
    Ok(cells)
}

pub fn scenario_to_string(s: &Scenario) -> String {
    let g = &s.grid;
    let w = g.width() as usize;
    let priors = g.priors().clone();
    let prior_overrides = g
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.terrain_prior != priors.get(c.terrain))
        .map(|(i, c)| (i, c.terrain_prior))
        .collect();
    let file = ScenarioFile {
        format_version: FORMAT_VERSION,
        seed: Seed::from_u64(s.seed),
        controller_mode: s.controller_mode,
        grid: GridSection {
            width: g.width(),
            height: g.height(),
            cell_size: g.cell_size(),
            rows: g.cells().chunks(w).map(encode_row).collect(),
            prior_overrides,
            terrain_prior: priors,
        },
        threats: s.threats.clone(),
        fleet_config: s.fleet_config.clone(),
        net_config: s.net_config.clone(),
        mission_config: s.mission_config.clone(),
        threat_profiles: s.threat_profiles.clone(),
    };
    toml::to_string(&file).expect("scenario is always representable as TOML")
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<(), WorldError> {
    std::fs::write(path, scenario_to_string(s))?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, WorldError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

pub fn parse_scenario(text: &str) -> Result<Scenario, WorldError> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| WorldError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: "document".into(),
        message: e.message().to_string(),
    })?;
    match doc.get("format_version") {
        Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION as i64 => {}
        Some(toml::Value::Integer(v)) => return Err(WorldError::VersionMismatch { found: *v, expected: FORMAT_VERSION }),
        Some(_) => {
            return Err(WorldError::Parse { line: None, field: "format_version".into(), message: "must be an integer".into() })
        }
        None => return Err(WorldError::Parse { line: None, field: "format_version".into(), message: "missing".into() }),
    }
    let file: ScenarioFile = toml::from_str(text).map_err(|e| WorldError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        field: "scenario".into(),
        message: e.message().to_string(),
    })?;

    let gs = file.grid;
    if gs.cell_size != 1.0 {
        return Err(WorldError::Parse {
            line: None,
            field: "grid.cell_size".into(),
            message: format!("only 1.0 m cells are supported, got {}", gs.cell_size),
        });
    }
    gs.terrain_prior
        .validate()
        .map_err(|m| WorldError::Parse { line: None, field: "grid.terrain_prior".into(), message: m })?;
    if gs.rows.len() != gs.height as usize {
        return Err(WorldError::Parse {
            line: None,
            field: "grid.rows".into(),
            message: format!("{} rows for height {}", gs.rows.len(), gs.height),
        });
    }
    let mut cells = Vec::with_capacity(gs.width as usize * gs.height as usize);
    for (y, row) in gs.rows.iter().enumerate() {
        cells.extend(decode_row(row, gs.width as usize, &gs.terrain_prior, y)?);
    }
    for &(i, p) in &gs.prior_overrides {
        let field = format!("grid.prior_overrides[{i}]");
        let cell = cells
            .get_mut(i)
            .ok_or_else(|| WorldError::Parse { line: None, field: field.clone(), message: "cell out of bounds".into() })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(WorldError::Parse { line: None, field, message: format!("prior {p} outside [0,1]") });
        }
        cell.terrain_prior = p;
    }
    let grid = WorldGrid::from_cells(gs.width, gs.height, cells, gs.terrain_prior).map_err(|e| WorldError::Parse {
        line: None,
        field: "grid".into(),
        message: e.to_string(),
    })?;
    let seed = file
        .seed
        .to_u64()
        .map_err(|m| WorldError::Parse { line: None, field: "seed".into(), message: m })?;
    let field_err = |field: &str, m: String| WorldError::Parse { line: None, field: field.into(), message: m };
    file.fleet_config.validate().map_err(|m| field_err("fleet_config", m))?;
    file.net_config.validate().map_err(|m| field_err("net_config", m))?;
    file.mission_config.validate().map_err(|m| field_err("mission_config", m))?;
    file.threat_profiles.validate().map_err(|m| field_err("threat_profiles", m))?;
    let scenario = Scenario {
        grid,
        threats: file.threats,
        fleet_config: file.fleet_config,
        net_config: file.net_config,
        mission_config: file.mission_config,
        threat_profiles: file.threat_profiles,
        seed,
        controller_mode: file.controller_mode,
    };
    scenario.validate()?;
    Ok(scenario)
}
