//! Typed views over one environment's byte region.

use bytemuck::{Pod, Zeroable};

use crate::layout::{AgentState, ArenaLayout, BeliefLayout, PoiState, Tile, BELIEF_RECORD_SIZE};

pub const COUNTER_STEPS: usize = 0;
pub const COUNTER_TILES_DISCOVERED: usize = 1;
pub const COUNTER_POIS_FOUND: usize = 2;
pub const COUNTER_POIS_SAVED: usize = 3;

/// Last sighting of a POI or teammate. `stamp == 0` means never seen;
/// otherwise it is the step count at the sighting plus one.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Pod, Zeroable)]
pub struct BeliefRecord {
    pub x: u16,
    pub y: u16,
    pub stamp: u32,
}

const _: () = assert!(std::mem::size_of::<BeliefRecord>() == BELIEF_RECORD_SIZE);

impl BeliefRecord {
    pub fn known(&self) -> bool {
        self.stamp != 0
    }
}

/// The knowledge block: `n_beliefs` consecutive beliefs, each an observed-tile
/// bitset followed by POI records then agent records.
#[derive(Debug)]
pub struct Knowledge<B> {
    bytes: B,
    belief: BeliefLayout,
    n_beliefs: usize,
    n_pois: usize,
    n_agents: usize,
}

impl<B: AsRef<[u8]>> Knowledge<B> {
    pub fn new(bytes: B, layout: &ArenaLayout) -> Self {
        debug_assert_eq!(bytes.as_ref().len(), layout.n_beliefs * layout.belief.size);
        Self {
            bytes,
            belief: layout.belief,
            n_beliefs: layout.n_beliefs,
            n_pois: layout.n_pois,
            n_agents: layout.n_agents,
        }
    }

    pub fn n_beliefs(&self) -> usize {
        self.n_beliefs
    }

    fn base(&self, b: usize) -> usize {
        debug_assert!(b < self.n_beliefs);
        b * self.belief.size
    }

    pub fn bitset(&self, b: usize) -> &[u8] {
        let base = self.base(b);
        &self.bytes.as_ref()[base..base + self.belief.bitset_bytes]
    }

    #[inline]
    pub fn known(&self, b: usize, tile: usize) -> bool {
        self.bytes.as_ref()[self.base(b) + (tile >> 3)] & (1 << (tile & 7)) != 0
    }

    pub fn count_known(&self, b: usize) -> usize {
        self.bitset(b).iter().map(|x| x.count_ones() as usize).sum()
    }

    fn record_at(&self, offset: usize) -> BeliefRecord {
        bytemuck::pod_read_unaligned(&self.bytes.as_ref()[offset..offset + BELIEF_RECORD_SIZE])
    }

    pub fn poi_record(&self, b: usize, poi: usize) -> BeliefRecord {
        debug_assert!(poi < self.n_pois);
        self.record_at(self.base(b) + self.belief.poi_records + poi * BELIEF_RECORD_SIZE)
    }

    pub fn agent_record(&self, b: usize, agent: usize) -> BeliefRecord {
        debug_assert!(agent < self.n_agents);
        self.record_at(self.base(b) + self.belief.agent_records + agent * BELIEF_RECORD_SIZE)
    }
}

impl<B: AsRef<[u8]> + AsMut<[u8]>> Knowledge<B> {
    /// Sets the bit for `tile`; true if it was previously clear.
    #[inline]
    pub fn mark_known(&mut self, b: usize, tile: usize) -> bool {
        let i = self.base(b) + (tile >> 3);
        let bit = 1 << (tile & 7);
        let byte = &mut self.bytes.as_mut()[i];
        let fresh = *byte & bit == 0;
        *byte |= bit;
        fresh
    }

    fn write_record(&mut self, offset: usize, rec: BeliefRecord) {
        self.bytes.as_mut()[offset..offset + BELIEF_RECORD_SIZE].copy_from_slice(bytemuck::bytes_of(&rec));
    }

    pub fn set_poi_record(&mut self, b: usize, poi: usize, rec: BeliefRecord) {
        let off = self.base(b) + self.belief.poi_records + poi * BELIEF_RECORD_SIZE;
        self.write_record(off, rec);
    }

    pub fn set_agent_record(&mut self, b: usize, agent: usize, rec: BeliefRecord) {
        let off = self.base(b) + self.belief.agent_records + agent * BELIEF_RECORD_SIZE;
        self.write_record(off, rec);
    }
}

/// Mutable borrows of every block of one environment at once.
pub struct EnvParts<'a> {
    pub grid: &'a mut [Tile],
    pub agents: &'a mut [AgentState],
    pub pois: &'a mut [PoiState],
    pub speeds: &'a mut [f32],
    pub knowledge: Knowledge<&'a mut [u8]>,
    pub counters: &'a mut [i32],
}

/// Read-only view of one environment.
#[derive(Clone, Copy)]
pub struct EnvView<'a> {
    bytes: &'a [u8],
    layout: &'a ArenaLayout,
}

impl<'a> EnvView<'a> {
    /// `bytes` must be at least `raw_stride` long and 8-byte aligned.
    pub fn new(bytes: &'a [u8], layout: &'a ArenaLayout) -> Self {
        assert!(bytes.len() >= layout.raw_stride, "env region shorter than raw stride");
        Self { bytes, layout }
    }

    pub fn layout(&self) -> &'a ArenaLayout {
        self.layout
    }
    pub fn bytes(&self) -> &'a [u8] {
        self.bytes
    }
    pub fn grid(&self) -> &'a [Tile] {
        bytemuck::cast_slice(&self.bytes[self.layout.grid_bytes()])
    }
    pub fn tile(&self, x: usize, y: usize) -> &'a Tile {
        &self.grid()[y * self.layout.width + x]
    }
    pub fn agents(&self) -> &'a [AgentState] {
        bytemuck::cast_slice(&self.bytes[self.layout.agent_bytes()])
    }
    pub fn pois(&self) -> &'a [PoiState] {
        bytemuck::cast_slice(&self.bytes[self.layout.poi_bytes()])
    }
    pub fn speeds(&self) -> &'a [f32] {
        bytemuck::cast_slice(&self.bytes[self.layout.speed_bytes()])
    }
    pub fn knowledge(&self) -> Knowledge<&'a [u8]> {
        Knowledge::new(&self.bytes[self.layout.knowledge_bytes()], self.layout)
    }
    pub fn counters(&self) -> &'a [i32] {
        bytemuck::cast_slice(&self.bytes[self.layout.counter_bytes()])
    }
    pub fn steps_elapsed(&self) -> i32 {
        self.counters()[COUNTER_STEPS]
    }
}

pub struct EnvViewMut<'a> {
    bytes: &'a mut [u8],
    layout: &'a ArenaLayout,
}

impl<'a> EnvViewMut<'a> {
    pub fn new(bytes: &'a mut [u8], layout: &'a ArenaLayout) -> Self {
        assert!(bytes.len() >= layout.raw_stride, "env region shorter than raw stride");
        Self { bytes, layout }
    }

    pub fn layout(&self) -> &'a ArenaLayout {
        self.layout
    }

    pub fn view(&self) -> EnvView<'_> {
        EnvView { bytes: self.bytes, layout: self.layout }
    }

    pub fn bytes_mut(&mut self) -> &mut [u8] {
        self.bytes
    }

    pub fn parts(&mut self) -> EnvParts<'_> {
        let l = self.layout;
        let (grid, rest) = self.bytes[..l.raw_stride].split_at_mut(l.offset_agents);
        let (agents, rest) = rest.split_at_mut(l.offset_pois - l.offset_agents);
        let (pois, rest) = rest.split_at_mut(l.offset_speeds - l.offset_pois);
        let (speeds, rest) = rest.split_at_mut(l.offset_knowledge - l.offset_speeds);
        let (knowledge, counters) = rest.split_at_mut(l.offset_counters - l.offset_knowledge);
        EnvParts {
            grid: bytemuck::cast_slice_mut(grid),
            agents: bytemuck::cast_slice_mut(agents),
            pois: bytemuck::cast_slice_mut(pois),
            speeds: bytemuck::cast_slice_mut(speeds),
            knowledge: Knowledge::new(knowledge, l),
            counters: bytemuck::cast_slice_mut(counters),
        }
    }
}
