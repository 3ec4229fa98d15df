//! Packed entity records and the byte layout of one environment inside the arena.
//!
//! Every environment occupies one fixed-size region of a flat slab:
//!
//! | block     | element         | size                     |
//! |-----------|-----------------|--------------------------|
//! | grid      | [`Tile`]        | `W * H * 8`              |
//! | agents    | [`AgentState`]  | `n_agents * 24`          |
//! | pois      | [`PoiState`]    | `n_pois * 16`            |
//! | speeds    | `f32`           | `n_agents * n_types * 4` |
//! | knowledge | belief records  | depends on [`KnowledgeMode`] |
//! | counters  | `i32; 4`        | 16                       |
//!
//! The region is then padded so consecutive environments start on a
//! [`STRIDE_ALIGN`]-byte boundary.

use bytemuck::{Pod, Zeroable};
use half::f16;

use crate::error::{Error, Result};

/// Environment regions start on multiples of this many bytes.
pub const STRIDE_ALIGN: usize = 256;

/// Width of the per-tile visibility mask and the POI savable-by mask.
pub const MAX_AGENTS: usize = 20;

pub const MAX_TILE_TYPES: usize = 128;

pub const TILE_SIZE: usize = 8;
pub const AGENT_STATE_SIZE: usize = 24;
pub const POI_STATE_SIZE: usize = 16;
pub const COUNTERS_SIZE: usize = 16;

/// Size of one belief record (POI or teammate sighting) in the knowledge block.
pub const BELIEF_RECORD_SIZE: usize = 8;

const WALKABLE_BIT: u32 = 1 << 0;
const FLYABLE_BIT: u32 = 1 << 1;
const AQUATIC_BIT: u32 = 1 << 2;
const BLOCKING_BIT: u32 = 1 << 3;
const OBSERVED_BIT: u32 = 1 << 4;
const TYPE_SHIFT: u32 = 5;
const TYPE_MASK: u32 = 0x7F;
const VIS_SHIFT: u32 = 12;
const VIS_MASK: u32 = 0xF_FFFF;

/// Unpacked view of a tile's 32-bit flag word.
///
/// Bits 0..=4 hold walkable, flyable, aquatic, blocking and global-observed;
/// bits 5..=11 the 7-bit type id; bits 12..=31 one visibility bit per agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TileFlags {
    pub walkable: bool,
    pub flyable: bool,
    pub aquatic: bool,
    pub blocking: bool,
    pub global_observed: bool,
    pub type_id: u8,
    pub visibility_mask: u32,
}

impl TileFlags {
    pub fn pack(&self) -> Result<u32> {
        pack_tile_flags(
            self.walkable,
            self.flyable,
            self.aquatic,
            self.blocking,
            self.global_observed,
            self.type_id,
            self.visibility_mask,
        )
    }
}

pub fn pack_tile_flags(
    walkable: bool,
    flyable: bool,
    aquatic: bool,
    blocking: bool,
    global_observed: bool,
    type_id: u8,
    visibility_mask: u32,
) -> Result<u32> {
    if type_id as u32 > TYPE_MASK {
        return Err(Error::validation(format!("type_id {type_id} exceeds 7 bits")));
    }
    if visibility_mask > VIS_MASK {
        return Err(Error::validation(format!(
            "visibility mask {visibility_mask:#x} exceeds 20 bits"
        )));
    }
    Ok((walkable as u32)
        | (flyable as u32) << 1
        | (aquatic as u32) << 2
        | (blocking as u32) << 3
        | (global_observed as u32) << 4
        | (type_id as u32) << TYPE_SHIFT
        | visibility_mask << VIS_SHIFT)
}

pub fn unpack_tile_flags(word: u32) -> TileFlags {
    TileFlags {
        walkable: word & WALKABLE_BIT != 0,
        flyable: word & FLYABLE_BIT != 0,
        aquatic: word & AQUATIC_BIT != 0,
        blocking: word & BLOCKING_BIT != 0,
        global_observed: word & OBSERVED_BIT != 0,
        type_id: ((word >> TYPE_SHIFT) & TYPE_MASK) as u8,
        visibility_mask: (word >> VIS_SHIFT) & VIS_MASK,
    }
}

/// One grid cell: packed flags plus terrain altitude.
#[repr(C, align(8))]
#[derive(Debug, Clone, Copy, Default, PartialEq, Pod, Zeroable)]
pub struct Tile {
    pub flags: u32,
    pub altitude: f32,
}

impl Tile {
    #[inline]
    pub fn walkable(&self) -> bool {
        self.flags & WALKABLE_BIT != 0
    }
    #[inline]
    pub fn flyable(&self) -> bool {
        self.flags & FLYABLE_BIT != 0
    }
    #[inline]
    pub fn aquatic(&self) -> bool {
        self.flags & AQUATIC_BIT != 0
    }
    #[inline]
    pub fn blocking(&self) -> bool {
        self.flags & BLOCKING_BIT != 0
    }
    #[inline]
    pub fn observed(&self) -> bool {
        self.flags & OBSERVED_BIT != 0
    }
    #[inline]
    pub fn set_observed(&mut self) {
        self.flags |= OBSERVED_BIT;
    }
    #[inline]
    pub fn type_id(&self) -> usize {
        ((self.flags >> TYPE_SHIFT) & TYPE_MASK) as usize
    }
    #[inline]
    pub fn visibility_mask(&self) -> u32 {
        self.flags >> VIS_SHIFT
    }
    #[inline]
    pub fn seen_by(&self, agent: usize) -> bool {
        self.flags & (1 << (VIS_SHIFT as usize + agent)) != 0
    }
    #[inline]
    pub fn mark_seen_by(&mut self, agent: usize) {
        self.flags |= 1 << (VIS_SHIFT as usize + agent);
    }
}

pub const AGENT_STUCK: u8 = 1 << 0;
pub const AGENT_WALK: u8 = 1 << 1;
pub const AGENT_FLY: u8 = 1 << 2;
pub const AGENT_SWIM: u8 = 1 << 3;

/// A seeker. `max_alt` is an IEEE half stored as little-endian bytes so the
/// record stays exactly 24 bytes with no implicit padding.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Pod, Zeroable)]
pub struct AgentState {
    pub x: f32,
    pub y: f32,
    pub view_range: f32,
    pub deployment_remaining: f32,
    pub last_x: u16,
    pub last_y: u16,
    pub flags: u8,
    pub max_alt: [u8; 2],
    pub pad: u8,
}

impl AgentState {
    #[inline]
    pub fn stuck(&self) -> bool {
        self.flags & AGENT_STUCK != 0
    }
    #[inline]
    pub fn set_stuck(&mut self, stuck: bool) {
        if stuck {
            self.flags |= AGENT_STUCK;
        } else {
            self.flags &= !AGENT_STUCK;
        }
    }
    #[inline]
    pub fn can_walk(&self) -> bool {
        self.flags & AGENT_WALK != 0
    }
    #[inline]
    pub fn can_fly(&self) -> bool {
        self.flags & AGENT_FLY != 0
    }
    #[inline]
    pub fn can_swim(&self) -> bool {
        self.flags & AGENT_SWIM != 0
    }
    #[inline]
    pub fn deployed(&self) -> bool {
        self.deployment_remaining <= 0.0
    }
    #[inline]
    pub fn max_alt(&self) -> f32 {
        f16::from_le_bytes(self.max_alt).to_f32()
    }
    pub fn set_max_alt(&mut self, value: f32) {
        self.max_alt = f16::from_f32(value).to_le_bytes();
    }
    #[inline]
    pub fn tile(&self) -> (usize, usize) {
        (self.x as usize, self.y as usize)
    }
}

pub const POI_SAVABLE_MASK: u32 = 0xF_FFFF;
pub const POI_FOUND: u32 = 1 << 20;
pub const POI_SAVED: u32 = 1 << 21;
pub const POI_MOVES: u32 = 1 << 22;
pub const POI_RESERVED: u32 = !(POI_SAVABLE_MASK | POI_FOUND | POI_SAVED | POI_MOVES);

/// A hider (person of interest).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Pod, Zeroable)]
pub struct PoiState {
    pub x: f32,
    pub y: f32,
    pub state_flags: u32,
    pub last_x: u16,
    pub last_y: u16,
}

impl PoiState {
    #[inline]
    pub fn savable_by(&self) -> u32 {
        self.state_flags & POI_SAVABLE_MASK
    }
    #[inline]
    pub fn found(&self) -> bool {
        self.state_flags & POI_FOUND != 0
    }
    #[inline]
    pub fn saved(&self) -> bool {
        self.state_flags & POI_SAVED != 0
    }
    #[inline]
    pub fn moves(&self) -> bool {
        self.state_flags & POI_MOVES != 0
    }
    #[inline]
    pub fn tile(&self) -> (usize, usize) {
        (self.x as usize, self.y as usize)
    }
}

const _: () = assert!(std::mem::size_of::<Tile>() == TILE_SIZE);
const _: () = assert!(std::mem::align_of::<Tile>() == 8);
const _: () = assert!(std::mem::size_of::<AgentState>() == AGENT_STATE_SIZE);
const _: () = assert!(std::mem::size_of::<PoiState>() == POI_STATE_SIZE);

/// What the knowledge block stores for each environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KnowledgeMode {
    /// No belief state (true-state and void observation modes).
    #[default]
    None,
    /// One fused belief shared by the whole team (centralized observations).
    Shared,
    /// One belief per agent (decentralized observations).
    PerAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StridePadding {
    #[default]
    Aligned,
    /// Only the 8-byte alignment `Tile` needs. Used by the false-sharing ablation.
    Unpadded,
}

/// Byte layout of a single belief inside the knowledge block: an observed-tile
/// bitset followed by one record per POI and one per agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeliefLayout {
    pub bitset_bytes: usize,
    pub poi_records: usize,
    pub agent_records: usize,
    pub size: usize,
}

impl BeliefLayout {
    pub fn new(width: usize, height: usize, n_agents: usize, n_pois: usize) -> Self {
        let bitset_bytes = round_up((width * height).div_ceil(8), 8);
        let poi_records = bitset_bytes;
        let agent_records = poi_records + n_pois * BELIEF_RECORD_SIZE;
        let size = agent_records + n_agents * BELIEF_RECORD_SIZE;
        Self { bitset_bytes, poi_records, agent_records, size }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArenaLayout {
    pub width: usize,
    pub height: usize,
    pub n_agents: usize,
    pub n_pois: usize,
    pub n_types: usize,
    pub knowledge_mode: KnowledgeMode,
    pub padding: StridePadding,
    pub offset_grid: usize,
    pub offset_agents: usize,
    pub offset_pois: usize,
    pub offset_speeds: usize,
    pub offset_knowledge: usize,
    pub offset_counters: usize,
    pub belief: BeliefLayout,
    pub n_beliefs: usize,
    pub raw_stride: usize,
    pub env_stride: usize,
}

#[inline]
pub fn round_up(value: usize, multiple: usize) -> usize {
    value.div_ceil(multiple) * multiple
}

/// `(raw + 255) & !255`.
#[inline]
pub fn padded_stride(raw_stride: usize) -> usize {
    (raw_stride + (STRIDE_ALIGN - 1)) & !(STRIDE_ALIGN - 1)
}

pub fn compute_layout(
    width: usize,
    height: usize,
    n_agents: usize,
    n_pois: usize,
    n_types: usize,
    knowledge_mode: KnowledgeMode,
) -> Result<ArenaLayout> {
    compute_layout_with(width, height, n_agents, n_pois, n_types, knowledge_mode, StridePadding::Aligned)
}

pub fn compute_layout_with(
    width: usize,
    height: usize,
    n_agents: usize,
    n_pois: usize,
    n_types: usize,
    knowledge_mode: KnowledgeMode,
    padding: StridePadding,
) -> Result<ArenaLayout> {
    if width == 0 || height == 0 || n_agents == 0 || n_pois == 0 || n_types == 0 {
        return Err(Error::validation(format!(
            "layout counts must be positive (W={width}, H={height}, agents={n_agents}, pois={n_pois}, types={n_types})"
        )));
    }
    if n_agents > MAX_AGENTS {
        return Err(Error::Capacity(format!(
            "{n_agents} agents exceed the {MAX_AGENTS}-bit visibility mask"
        )));
    }
    if n_types > MAX_TILE_TYPES {
        return Err(Error::Capacity(format!("{n_types} tile types exceed {MAX_TILE_TYPES}")));
    }
    // Positions are stored as u16 tile indices.
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::Capacity(format!("map {width}x{height} exceeds u16 coordinates")));
    }

    let belief = BeliefLayout::new(width, height, n_agents, n_pois);
    let n_beliefs = match knowledge_mode {
        KnowledgeMode::None => 0,
        KnowledgeMode::Shared => 1,
        KnowledgeMode::PerAgent => n_agents,
    };

    let offset_grid = 0;
    let offset_agents = offset_grid + width * height * TILE_SIZE;
    let offset_pois = offset_agents + n_agents * AGENT_STATE_SIZE;
    let offset_speeds = offset_pois + n_pois * POI_STATE_SIZE;
    let offset_knowledge = offset_speeds + n_agents * n_types * 4;
    let offset_counters = offset_knowledge + n_beliefs * belief.size;
    let raw_stride = offset_counters + COUNTERS_SIZE;
    let env_stride = match padding {
        StridePadding::Aligned => padded_stride(raw_stride),
        StridePadding::Unpadded => round_up(raw_stride, TILE_SIZE),
    };

    Ok(ArenaLayout {
        width,
        height,
        n_agents,
        n_pois,
        n_types,
        knowledge_mode,
        padding,
        offset_grid,
        offset_agents,
        offset_pois,
        offset_speeds,
        offset_knowledge,
        offset_counters,
        belief,
        n_beliefs,
        raw_stride,
        env_stride,
    })
}

impl ArenaLayout {
    pub fn n_tiles(&self) -> usize {
        self.width * self.height
    }

    pub fn grid_bytes(&self) -> std::ops::Range<usize> {
        self.offset_grid..self.offset_agents
    }
    pub fn agent_bytes(&self) -> std::ops::Range<usize> {
        self.offset_agents..self.offset_pois
    }
    pub fn poi_bytes(&self) -> std::ops::Range<usize> {
        self.offset_pois..self.offset_speeds
    }
    pub fn speed_bytes(&self) -> std::ops::Range<usize> {
        self.offset_speeds..self.offset_knowledge
    }
    pub fn knowledge_bytes(&self) -> std::ops::Range<usize> {
        self.offset_knowledge..self.offset_counters
    }
    pub fn counter_bytes(&self) -> std::ops::Range<usize> {
        self.offset_counters..self.raw_stride
    }

    /// The six blocks in table order.
    pub fn blocks(&self) -> [(&'static str, std::ops::Range<usize>); 6] {
        [
            ("grid", self.grid_bytes()),
            ("agents", self.agent_bytes()),
            ("pois", self.poi_bytes()),
            ("speeds", self.speed_bytes()),
            ("knowledge", self.knowledge_bytes()),
            ("counters", self.counter_bytes()),
        ]
    }
}
