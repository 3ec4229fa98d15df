//! The flat slab holding every environment, the pristine template, and reset.

use crate::dynamics::Rules;
use crate::env::{EnvParts, EnvView, EnvViewMut};
use crate::error::{Error, Result};
use crate::exec::{Executor, SharedChunks};
use crate::layout::{
    compute_layout_with, AgentState, ArenaLayout, KnowledgeMode, PoiState, StridePadding, Tile,
    AGENT_FLY, AGENT_SWIM, AGENT_WALK, POI_MOVES, STRIDE_ALIGN,
};
use crate::map::{MapSpec, Spawn};
use crate::rng::EnvRng;
use crate::slab::{AlignedBuf, InitPolicy};

/// Where an entity is placed at reset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpawnSite {
    Fixed(u32),
    /// Uniform over these tile indices.
    Random(Vec<u32>),
}

impl SpawnSite {
    fn placeholder(&self) -> u32 {
        match self {
            SpawnSite::Fixed(t) => *t,
            SpawnSite::Random(c) => c[0],
        }
    }

    #[inline]
    fn draw(&self, rng: &mut EnvRng) -> u32 {
        match self {
            SpawnSite::Fixed(t) => *t,
            SpawnSite::Random(c) => c[rng.below(c.len())],
        }
    }
}

/// Everything needed to build or reset one environment of a given map.
#[derive(Debug)]
pub struct EnvTemplate {
    layout: ArenaLayout,
    rules: Rules,
    pristine: AlignedBuf,
    agent_spawns: Vec<SpawnSite>,
    poi_spawns: Vec<SpawnSite>,
}

fn spawn_site(spawn: Spawn, width: usize, candidates: impl FnOnce() -> Vec<u32>, what: &str) -> Result<SpawnSite> {
    match spawn {
        Spawn::At { x, y } => Ok(SpawnSite::Fixed(y as u32 * width as u32 + x as u32)),
        Spawn::Random => {
            let c = candidates();
            if c.is_empty() {
                Err(Error::validation(format!("{what} has no tile it can spawn on")))
            } else {
                Ok(SpawnSite::Random(c))
            }
        }
    }
}

impl EnvTemplate {
    pub fn new(spec: &MapSpec, knowledge: KnowledgeMode, padding: StridePadding) -> Result<Self> {
        let layout = compute_layout_with(
            spec.width,
            spec.height,
            spec.n_agents(),
            spec.n_pois(),
            spec.n_types(),
            knowledge,
            padding,
        )?;
        let agent_spawns = spec
            .agents
            .iter()
            .enumerate()
            .map(|(a, def)| spawn_site(def.spawn, spec.width, || spec.agent_candidates(a), &format!("agents[{a}]")))
            .collect::<Result<Vec<_>>>()?;
        let poi_spawns = spec
            .pois
            .iter()
            .enumerate()
            .map(|(p, def)| spawn_site(def.spawn, spec.width, || spec.poi_candidates(), &format!("pois[{p}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut pristine =
            AlignedBuf::zeroed(layout.env_stride, 1, STRIDE_ALIGN, &Executor::sequential(), InitPolicy::Serial)?;
        let placeholders = (
            agent_spawns.iter().map(SpawnSite::placeholder).collect::<Vec<_>>(),
            poi_spawns.iter().map(SpawnSite::placeholder).collect::<Vec<_>>(),
        );
        write_pristine(spec, &layout, &placeholders.0, &placeholders.1, pristine.as_mut_slice());
        Ok(Self { rules: Rules::new(spec, knowledge), layout, pristine, agent_spawns, poi_spawns })
    }

    pub fn layout(&self) -> &ArenaLayout {
        &self.layout
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    /// `env_stride` bytes: the static initial state with placeholder entities.
    pub fn pristine(&self) -> &[u8] {
        self.pristine.as_slice()
    }

    pub fn pristine_view(&self) -> EnvView<'_> {
        EnvView::new(self.pristine.as_slice(), &self.layout)
    }

    /// Overwrites `region` with the pristine bytes, then places agents and POIs,
    /// drawing random spawns from `rng` (agents first, ascending, then POIs).
    pub fn reset_into(&self, region: &mut [u8], rng: &mut EnvRng) {
        region.copy_from_slice(self.pristine.as_slice());
        let mut env = EnvViewMut::new(region, &self.layout);
        self.place_entities(&mut env.parts(), rng);
    }

    fn place_entities(&self, parts: &mut EnvParts, rng: &mut EnvRng) {
        let w = self.layout.width as u32;
        for (agent, site) in parts.agents.iter_mut().zip(&self.agent_spawns) {
            let t = site.draw(rng);
            place_agent(agent, t % w, t / w);
        }
        for (poi, site) in parts.pois.iter_mut().zip(&self.poi_spawns) {
            let t = site.draw(rng);
            place_poi(poi, t % w, t / w);
        }
    }
}

fn place_agent(a: &mut AgentState, x: u32, y: u32) {
    a.x = x as f32 + 0.5;
    a.y = y as f32 + 0.5;
    a.last_x = x as u16;
    a.last_y = y as u16;
}

fn place_poi(p: &mut PoiState, x: u32, y: u32) {
    p.x = x as f32 + 0.5;
    p.y = y as f32 + 0.5;
    p.last_x = x as u16;
    p.last_y = y as u16;
}

fn write_pristine(spec: &MapSpec, layout: &ArenaLayout, agent_tiles: &[u32], poi_tiles: &[u32], out: &mut [u8]) {
    let mut env = EnvViewMut::new(out, layout);
    let parts = env.parts();
    for (tile, &type_id) in parts.grid.iter_mut().zip(&spec.grid) {
        let def = &spec.type_table[type_id as usize];
        let flags = crate::layout::TileFlags {
            walkable: def.walkable,
            flyable: def.flyable,
            aquatic: def.aquatic,
            blocking: def.blocking,
            global_observed: false,
            type_id,
            visibility_mask: 0,
        };
        *tile = Tile { flags: flags.pack().expect("validated map"), altitude: def.altitude };
    }
    let w = spec.width as u32;
    for ((state, def), &t) in parts.agents.iter_mut().zip(&spec.agents).zip(agent_tiles) {
        let caps = def.capabilities;
        state.view_range = def.view_range;
        state.deployment_remaining = def.deployment;
        state.flags = (caps.walk as u8 * AGENT_WALK) | (caps.fly as u8 * AGENT_FLY) | (caps.swim as u8 * AGENT_SWIM);
        state.set_max_alt(def.max_alt);
        state.pad = 0;
        place_agent(state, t % w, t / w);
    }
    for ((state, def), &t) in parts.pois.iter_mut().zip(&spec.pois).zip(poi_tiles) {
        state.state_flags = def.savable_by | if def.moves { POI_MOVES } else { 0 };
        place_poi(state, t % w, t / w);
    }
    parts.speeds.copy_from_slice(&spec.speeds);
}

/// Builds the pristine bytes of one environment for `spec`.
pub fn build_pristine(spec: &MapSpec, knowledge: KnowledgeMode) -> Result<Vec<u8>> {
    Ok(EnvTemplate::new(spec, knowledge, StridePadding::Aligned)?.pristine().to_vec())
}

/// `n_envs` environments laid out back to back, `env_stride` bytes apart.
#[derive(Debug)]
pub struct EnvironmentArena {
    slab: AlignedBuf,
    layout: ArenaLayout,
    n_envs: usize,
}

impl EnvironmentArena {
    /// Allocates and zero-fills the slab, one env region per work item, so the
    /// pages of each env are first written by a pool worker.
    pub fn allocate(layout: &ArenaLayout, n_envs: usize, exec: &Executor, init: InitPolicy) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::validation("n_envs must be at least 1"));
        }
        let slab = AlignedBuf::zeroed(layout.env_stride, n_envs, STRIDE_ALIGN, exec, init)?;
        Ok(Self { slab, layout: *layout, n_envs })
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    pub fn layout(&self) -> &ArenaLayout {
        &self.layout
    }

    pub fn env_stride(&self) -> usize {
        self.layout.env_stride
    }

    pub fn bytes(&self) -> &[u8] {
        self.slab.as_slice()
    }

    pub fn as_ptr(&self) -> *const u8 {
        self.slab.as_ptr()
    }

    /// The full stride region of env `i`, padding included.
    pub fn region(&self, i: usize) -> &[u8] {
        let s = self.layout.env_stride;
        &self.slab.as_slice()[i * s..(i + 1) * s]
    }

    pub fn region_mut(&mut self, i: usize) -> &mut [u8] {
        let s = self.layout.env_stride;
        &mut self.slab.as_mut_slice()[i * s..(i + 1) * s]
    }

    pub fn env(&self, i: usize) -> EnvView<'_> {
        let s = self.layout.env_stride;
        EnvView::new(&self.slab.as_slice()[i * s..(i + 1) * s], &self.layout)
    }

    pub fn env_mut(&mut self, i: usize) -> EnvViewMut<'_> {
        let s = self.layout.env_stride;
        EnvViewMut::new(&mut self.slab.as_mut_slice()[i * s..(i + 1) * s], &self.layout)
    }

    /// Env regions as chunks that workers may borrow concurrently.
    pub fn regions(&mut self) -> SharedChunks<'_, u8> {
        let s = self.layout.env_stride;
        SharedChunks::new(self.slab.as_mut_slice(), s)
    }

    pub fn reset_env(&mut self, template: &EnvTemplate, i: usize, rng: &mut EnvRng) {
        assert!(i < self.n_envs, "env {i} out of range");
        debug_assert_eq!(template.layout(), &self.layout);
        template.reset_into(self.region_mut(i), rng);
    }
}

/// Allocates an arena for `spec` with aligned strides and a single-threaded
/// zero-fill.
pub fn allocate_arena(spec: &MapSpec, n_envs: usize, knowledge: KnowledgeMode) -> Result<(EnvironmentArena, EnvTemplate)> {
    let template = EnvTemplate::new(spec, knowledge, StridePadding::Aligned)?;
    let arena = EnvironmentArena::allocate(template.layout(), n_envs, &Executor::sequential(), InitPolicy::FirstTouch)?;
    Ok((arena, template))
}
