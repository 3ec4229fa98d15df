//! Map loading: a PNG whose pixels select tile types by exact RGB match, plus a
//! JSON document describing the tile types, agents, POIs and reward settings.

use std::collections::HashMap;
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::layout::{MAX_AGENTS, MAX_TILE_TYPES};

pub const DEFAULT_HORIZON: u32 = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TileTypeDef {
    pub type_id: u8,
    pub rgb: [u8; 3],
    pub walkable: bool,
    pub flyable: bool,
    pub aquatic: bool,
    pub blocking: bool,
    pub altitude: f32,
    pub stuck_probability: f32,
    /// Stored for downstream consumers; it has no effect on the dynamics.
    pub dangerous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub walk: bool,
    pub fly: bool,
    pub swim: bool,
}

impl Capabilities {
    pub fn is_empty(&self) -> bool {
        !(self.walk || self.fly || self.swim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spawn {
    Random,
    At { x: u16, y: u16 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDef {
    pub index: usize,
    pub capabilities: Capabilities,
    pub view_range: f32,
    /// Highest terrain a flyer may enter. Infinite when unset.
    pub max_alt: f32,
    pub spawn: Spawn,
    pub deployment: f32,
}

impl AgentDef {
    /// `max_alt` as the engine sees it after half-precision storage.
    pub fn stored_max_alt(&self) -> f32 {
        f16::from_f32(self.max_alt).to_f32()
    }

    pub fn can_occupy(&self, tile: &TileTypeDef) -> bool {
        let caps = self.capabilities;
        !tile.blocking
            && ((caps.walk && tile.walkable)
                || (caps.swim && tile.aquatic)
                || (caps.fly && tile.flyable && tile.altitude <= self.stored_max_alt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiDef {
    pub index: usize,
    pub spawn: Spawn,
    pub moves: bool,
    pub savable_by: u32,
}

/// Everything parsed from the JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub type_table: Vec<TileTypeDef>,
    /// Row-major `[agent][type]`, tiles per step.
    pub speeds: Vec<f32>,
    pub agents: Vec<AgentDef>,
    pub pois: Vec<PoiDef>,
    pub horizon: u32,
    pub rewards: RewardConfig,
    pub dynamics: DynamicsConfig,
}

/// Tile-type ids laid out row-major, row 0 at the top of the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl TypeGrid {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.width + x]
    }
}

/// A validated world description.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<u8>,
    pub type_table: Vec<TileTypeDef>,
    pub speeds: Vec<f32>,
    pub agents: Vec<AgentDef>,
    pub pois: Vec<PoiDef>,
    pub horizon: u32,
    pub rewards: RewardConfig,
    pub dynamics: DynamicsConfig,
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    tile_types: Vec<RawTileType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speeds: Option<Vec<Vec<f32>>>,
    agents: Vec<RawAgent>,
    pois: Vec<RawPoi>,
    #[serde(default = "default_horizon")]
    horizon: u32,
    #[serde(default)]
    rewards: RawRewards,
    #[serde(default)]
    dynamics: RawDynamics,
}

fn default_horizon() -> u32 {
    DEFAULT_HORIZON
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTileType {
    id: u32,
    rgb: [u8; 3],
    #[serde(default)]
    walkable: bool,
    #[serde(default)]
    flyable: bool,
    #[serde(default)]
    aquatic: bool,
    #[serde(default)]
    blocking: bool,
    #[serde(default)]
    altitude: f32,
    #[serde(default)]
    stuck_probability: f32,
    #[serde(default)]
    dangerous: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum RawCapability {
    Walk,
    Fly,
    Swim,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSpawn {
    Named(String),
    At([u32; 2]),
}

impl Default for RawSpawn {
    fn default() -> Self {
        RawSpawn::Named("random".into())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    capabilities: Vec<RawCapability>,
    view_range: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_alt: Option<f32>,
    #[serde(default)]
    spawn: RawSpawn,
    #[serde(default)]
    deployment: f32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoi {
    #[serde(default)]
    spawn: RawSpawn,
    #[serde(default)]
    moves: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    savable_by: Option<Vec<u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRewards {
    #[serde(default = "RewardConfig::default_tile")]
    tile: f32,
    #[serde(default = "RewardConfig::default_found")]
    found: f32,
    #[serde(default = "RewardConfig::default_saved")]
    saved: f32,
}

impl Default for RawRewards {
    fn default() -> Self {
        let r = RewardConfig::default();
        Self { tile: r.r_tile, found: r.r_found, saved: r.r_saved }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    #[serde(default = "DynamicsConfig::default_alt_scale")]
    alt_scale: f32,
    #[serde(default = "DynamicsConfig::default_eye_height")]
    eye_height: f32,
    #[serde(default = "DynamicsConfig::default_poi_speed")]
    poi_speed: f32,
    #[serde(default)]
    per_agent_rewards: bool,
}

impl Default for RawDynamics {
    fn default() -> Self {
        let d = DynamicsConfig::default();
        Self {
            alt_scale: d.alt_scale,
            eye_height: d.eye_height,
            poi_speed: d.poi_speed,
            per_agent_rewards: d.per_agent_rewards,
        }
    }
}

fn convert_spawn(raw: &RawSpawn, what: &str) -> Result<Spawn> {
    match raw {
        RawSpawn::Named(s) if s == "random" => Ok(Spawn::Random),
        RawSpawn::Named(s) => Err(Error::validation(format!(
            "{what}.spawn: expected \"random\" or [x, y], got {s:?}"
        ))),
        RawSpawn::At([x, y]) => {
            let x = u16::try_from(*x)
                .map_err(|_| Error::validation(format!("{what}.spawn: x {x} out of range")))?;
            let y = u16::try_from(*y)
                .map_err(|_| Error::validation(format!("{what}.spawn: y {y} out of range")))?;
            Ok(Spawn::At { x, y })
        }
    }
}

fn spawn_to_raw(spawn: Spawn) -> RawSpawn {
    match spawn {
        Spawn::Random => RawSpawn::Named("random".into()),
        Spawn::At { x, y } => RawSpawn::At([x as u32, y as u32]),
    }
}

fn finite_non_negative(v: f32, what: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} must be finite and >= 0, got {v}")))
    }
}

pub fn parse_config(json: &[u8]) -> Result<MapConfig> {
    let de = &mut serde_json::Deserializer::from_slice(json);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Format(format!("config at `{path}`: {}", e.inner()))
    })?;
    validate_config(raw)
}

fn validate_config(raw: RawConfig) -> Result<MapConfig> {
    let n_types = raw.tile_types.len();
    if n_types == 0 {
        return Err(Error::validation("tile_types: at least one tile type is required"));
    }
    if n_types > MAX_TILE_TYPES {
        return Err(Error::Capacity(format!("tile_types: {n_types} exceeds {MAX_TILE_TYPES}")));
    }

    let mut type_table: Vec<Option<TileTypeDef>> = vec![None; n_types];
    let mut seen_rgb: HashMap<[u8; 3], u32> = HashMap::new();
    for (i, t) in raw.tile_types.iter().enumerate() {
        let what = format!("tile_types[{i}]");
        let id = t.id as usize;
        if id >= n_types {
            return Err(Error::validation(format!(
                "{what}.id: ids must be 0..{n_types} without gaps, got {id}"
            )));
        }
        if type_table[id].is_some() {
            return Err(Error::validation(format!("{what}.id: duplicate id {id}")));
        }
        if let Some(prev) = seen_rgb.insert(t.rgb, t.id) {
            return Err(Error::validation(format!(
                "{what}.rgb: {:?} already used by type {prev}",
                t.rgb
            )));
        }
        if t.blocking && t.walkable {
            return Err(Error::validation(format!("{what}: a blocking tile cannot be walkable")));
        }
        finite_non_negative(t.altitude, &format!("{what}.altitude"))?;
        if !(0.0..=1.0).contains(&t.stuck_probability) {
            return Err(Error::validation(format!(
                "{what}.stuck_probability must lie in [0, 1], got {}",
                t.stuck_probability
            )));
        }
        type_table[id] = Some(TileTypeDef {
            type_id: id as u8,
            rgb: t.rgb,
            walkable: t.walkable,
            flyable: t.flyable,
            aquatic: t.aquatic,
            blocking: t.blocking,
            altitude: t.altitude,
            stuck_probability: t.stuck_probability,
            dangerous: t.dangerous,
        });
    }
    let type_table: Vec<TileTypeDef> = type_table.into_iter().map(Option::unwrap).collect();

    let n_agents = raw.agents.len();
    if n_agents == 0 {
        return Err(Error::validation("agents: at least one agent is required"));
    }
    if n_agents > MAX_AGENTS {
        return Err(Error::Capacity(format!("agents: {n_agents} exceeds {MAX_AGENTS}")));
    }
    let mut agents = Vec::with_capacity(n_agents);
    for (i, a) in raw.agents.iter().enumerate() {
        let what = format!("agents[{i}]");
        let mut caps = Capabilities::default();
        for c in &a.capabilities {
            match c {
                RawCapability::Walk => caps.walk = true,
                RawCapability::Fly => caps.fly = true,
                RawCapability::Swim => caps.swim = true,
            }
        }
        if caps.is_empty() {
            return Err(Error::validation(format!("{what}.capabilities: at least one is required")));
        }
        if !(a.view_range.is_finite() && a.view_range > 0.0) {
            return Err(Error::validation(format!("{what}.view_range must be > 0")));
        }
        let max_alt = a.max_alt.unwrap_or(f32::INFINITY);
        if max_alt.is_nan() {
            return Err(Error::validation(format!("{what}.max_alt is NaN")));
        }
        finite_non_negative(a.deployment, &format!("{what}.deployment"))?;
        agents.push(AgentDef {
            index: i,
            capabilities: caps,
            view_range: a.view_range,
            max_alt,
            spawn: convert_spawn(&a.spawn, &what)?,
            deployment: a.deployment,
        });
    }

    let speeds = match &raw.speeds {
        None => vec![1.0; n_agents * n_types],
        Some(rows) => {
            if rows.len() != n_agents {
                return Err(Error::validation(format!(
                    "speeds: expected {n_agents} rows (one per agent), got {}",
                    rows.len()
                )));
            }
            let mut flat = Vec::with_capacity(n_agents * n_types);
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_types {
                    return Err(Error::validation(format!(
                        "speeds[{a}]: expected {n_types} entries (one per tile type), got {}",
                        row.len()
                    )));
                }
                for (t, &s) in row.iter().enumerate() {
                    finite_non_negative(s, &format!("speeds[{a}][{t}]"))?;
                }
                flat.extend_from_slice(row);
            }
            flat
        }
    };

    if raw.pois.is_empty() {
        return Err(Error::validation("pois: at least one POI is required"));
    }
    let all_agents = (1u32 << n_agents) - 1;
    let mut pois = Vec::with_capacity(raw.pois.len());
    for (i, p) in raw.pois.iter().enumerate() {
        let what = format!("pois[{i}]");
        let savable_by = match &p.savable_by {
            None => all_agents,
            Some(list) => {
                let mut mask = 0u32;
                for &a in list {
                    if a as usize >= n_agents {
                        return Err(Error::validation(format!(
                            "{what}.savable_by: agent {a} is not defined ({n_agents} agents)"
                        )));
                    }
                    mask |= 1 << a;
                }
                mask
            }
        };
        if savable_by == 0 {
            return Err(Error::validation(format!("{what}.savable_by: no agent can save this POI")));
        }
        pois.push(PoiDef {
            index: i,
            spawn: convert_spawn(&p.spawn, &what)?,
            moves: p.moves,
            savable_by,
        });
    }

    if raw.horizon == 0 {
        return Err(Error::validation("horizon must be > 0"));
    }
    let rewards = RewardConfig { r_tile: raw.rewards.tile, r_found: raw.rewards.found, r_saved: raw.rewards.saved };
    finite_non_negative(rewards.r_tile, "rewards.tile")?;
    finite_non_negative(rewards.r_found, "rewards.found")?;
    finite_non_negative(rewards.r_saved, "rewards.saved")?;

    let dynamics = DynamicsConfig {
        alt_scale: raw.dynamics.alt_scale,
        eye_height: raw.dynamics.eye_height,
        poi_speed: raw.dynamics.poi_speed,
        per_agent_rewards: raw.dynamics.per_agent_rewards,
    };
    if !(dynamics.alt_scale.is_finite() && dynamics.alt_scale > 0.0) {
        return Err(Error::validation("dynamics.alt_scale must be > 0"));
    }
    finite_non_negative(dynamics.eye_height, "dynamics.eye_height")?;
    finite_non_negative(dynamics.poi_speed, "dynamics.poi_speed")?;

    Ok(MapConfig { type_table, speeds, agents, pois, horizon: raw.horizon, rewards, dynamics })
}

// ---------------------------------------------------------------------------
// PNG

pub fn parse_map_image(png_bytes: &[u8], type_table: &[TileTypeDef]) -> Result<TypeGrid> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(png_bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::Format(format!("png: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(format!("png: {e}")))?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::Format(format!("png: expected RGB or RGBA pixels, got {other:?}")));
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::Format("png: empty image".into()));
    }

    let lookup: HashMap<[u8; 3], u8> = type_table.iter().map(|t| (t.rgb, t.type_id)).collect();
    let mut cells = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &buf[y * info.line_size..y * info.line_size + width * channels];
        for x in 0..width {
            let px = &row[x * channels..x * channels + 3];
            let rgb = [px[0], px[1], px[2]];
            match lookup.get(&rgb) {
                Some(&id) => cells.push(id),
                None => {
                    return Err(Error::validation(format!(
                        "unmatched RGB at ({x},{y}): ({},{},{})",
                        rgb[0], rgb[1], rgb[2]
                    )));
                }
            }
        }
    }
    Ok(TypeGrid { width, height, cells })
}

/// Encodes an RGB8 image from row-major pixels.
pub fn encode_png(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory png header");
        let flat: Vec<u8> = rgb.iter().flatten().copied().collect();
        writer.write_image_data(&flat).expect("in-memory png data");
    }
    out
}

pub fn build_map_spec(png_bytes: &[u8], json: &[u8]) -> Result<MapSpec> {
    let config = parse_config(json)?;
    let grid = parse_map_image(png_bytes, &config.type_table)?;
    MapSpec::new(grid, config)
}

impl MapSpec {
    /// Cross-validates a type grid against its configuration.
    pub fn new(grid: TypeGrid, config: MapConfig) -> Result<Self> {
        let TypeGrid { width, height, cells } = grid;
        if cells.len() != width * height {
            return Err(Error::validation(format!(
                "grid has {} cells, expected {width}x{height}",
                cells.len()
            )));
        }
        if width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(Error::Capacity(format!("map {width}x{height} exceeds u16 coordinates")));
        }
        let n_types = config.type_table.len();
        if let Some(i) = cells.iter().position(|&c| c as usize >= n_types) {
            return Err(Error::validation(format!(
                "cell ({},{}) has unknown type {}",
                i % width,
                i / width,
                cells[i]
            )));
        }
        let spec = MapSpec {
            width,
            height,
            grid: cells,
            type_table: config.type_table,
            speeds: config.speeds,
            agents: config.agents,
            pois: config.pois,
            horizon: config.horizon,
            rewards: config.rewards,
            dynamics: config.dynamics,
        };
        spec.validate_spawns()?;
        Ok(spec)
    }

    pub fn load(png_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<Self> {
        let (png_path, json_path) = (png_path.as_ref(), json_path.as_ref());
        let png = std::fs::read(png_path)
            .map_err(|e| Error::Resource(format!("{}: {e}", png_path.display())))?;
        let json = std::fs::read(json_path)
            .map_err(|e| Error::Resource(format!("{}: {e}", json_path.display())))?;
        build_map_spec(&png, &json).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", png_path.display())),
            Error::Format(m) => Error::Format(format!("{} / {}: {m}", png_path.display(), json_path.display())),
            other => other,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }
    pub fn n_pois(&self) -> usize {
        self.pois.len()
    }
    pub fn n_types(&self) -> usize {
        self.type_table.len()
    }

    pub fn tile_type(&self, x: usize, y: usize) -> &TileTypeDef {
        &self.type_table[self.grid[y * self.width + x] as usize]
    }

    pub fn speed(&self, agent: usize, type_id: usize) -> f32 {
        self.speeds[agent * self.n_types() + type_id]
    }

    /// Tiles an agent may spawn on or move into, row-major.
    pub fn agent_candidates(&self, agent: usize) -> Vec<u32> {
        let def = &self.agents[agent];
        (0..self.width * self.height)
            .filter(|&i| def.can_occupy(&self.type_table[self.grid[i] as usize]))
            .map(|i| i as u32)
            .collect()
    }

    /// Non-blocking tiles, where POIs may stand.
    pub fn poi_candidates(&self) -> Vec<u32> {
        (0..self.width * self.height)
            .filter(|&i| !self.type_table[self.grid[i] as usize].blocking)
            .map(|i| i as u32)
            .collect()
    }

    fn validate_spawns(&self) -> Result<()> {
        for a in &self.agents {
            match a.spawn {
                Spawn::At { x, y } => {
                    let (x, y) = (x as usize, y as usize);
                    if x >= self.width || y >= self.height {
                        return Err(Error::validation(format!(
                            "agents[{}].spawn ({x},{y}) is outside the {}x{} map",
                            a.index, self.width, self.height
                        )));
                    }
                    if !a.can_occupy(self.tile_type(x, y)) {
                        return Err(Error::validation(format!(
                            "agents[{}].spawn ({x},{y}) is not traversable for its capabilities",
                            a.index
                        )));
                    }
                }
                Spawn::Random => {
                    if self.agent_candidates(a.index).is_empty() {
                        return Err(Error::validation(format!(
                            "agents[{}]: no traversable tile to spawn on",
                            a.index
                        )));
                    }
                }
            }
        }
        for p in &self.pois {
            if p.savable_by >> self.n_agents() != 0 {
                return Err(Error::validation(format!(
                    "pois[{}].savable_by references an undefined agent",
                    p.index
                )));
            }
            match p.spawn {
                Spawn::At { x, y } => {
                    let (x, y) = (x as usize, y as usize);
                    if x >= self.width || y >= self.height {
                        return Err(Error::validation(format!(
                            "pois[{}].spawn ({x},{y}) is outside the map",
                            p.index
                        )));
                    }
                    if self.tile_type(x, y).blocking {
                        return Err(Error::validation(format!(
                            "pois[{}].spawn ({x},{y}) is on a blocking tile",
                            p.index
                        )));
                    }
                }
                Spawn::Random => {
                    if self.poi_candidates().is_empty() {
                        return Err(Error::validation("no non-blocking tile for POIs"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_config_json(&self) -> String {
        let raw = RawConfig {
            tile_types: self
                .type_table
                .iter()
                .map(|t| RawTileType {
                    id: t.type_id as u32,
                    rgb: t.rgb,
                    walkable: t.walkable,
                    flyable: t.flyable,
                    aquatic: t.aquatic,
                    blocking: t.blocking,
                    altitude: t.altitude,
                    stuck_probability: t.stuck_probability,
                    dangerous: t.dangerous,
                })
                .collect(),
            speeds: Some(self.speeds.chunks(self.n_types()).map(<[f32]>::to_vec).collect()),
            agents: self
                .agents
                .iter()
                .map(|a| {
                    let mut caps = Vec::new();
                    if a.capabilities.walk {
                        caps.push(RawCapability::Walk);
                    }
                    if a.capabilities.fly {
                        caps.push(RawCapability::Fly);
                    }
                    if a.capabilities.swim {
                        caps.push(RawCapability::Swim);
                    }
                    RawAgent {
                        capabilities: caps,
                        view_range: a.view_range,
                        max_alt: a.max_alt.is_finite().then_some(a.max_alt),
                        spawn: spawn_to_raw(a.spawn),
                        deployment: a.deployment,
                    }
                })
                .collect(),
            pois: self
                .pois
                .iter()
                .map(|p| RawPoi {
                    spawn: spawn_to_raw(p.spawn),
                    moves: p.moves,
                    savable_by: Some((0..20).filter(|b| p.savable_by & (1 << b) != 0).collect()),
                })
                .collect(),
            horizon: self.horizon,
            rewards: RawRewards {
                tile: self.rewards.r_tile,
                found: self.rewards.r_found,
                saved: self.rewards.r_saved,
            },
            dynamics: RawDynamics {
                alt_scale: self.dynamics.alt_scale,
                eye_height: self.dynamics.eye_height,
                poi_speed: self.dynamics.poi_speed,
                per_agent_rewards: self.dynamics.per_agent_rewards,
            },
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    pub fn to_png(&self) -> Vec<u8> {
        let pixels: Vec<[u8; 3]> = self.grid.iter().map(|&t| self.type_table[t as usize].rgb).collect();
        encode_png(self.width, self.height, &pixels)
    }
}
