//! One environment step: deployment, movement, stuck/rescue, visibility,
//! radio, POI find/save/move, rewards and termination.

use bytemuck::{Pod, Zeroable};

use crate::env::{
    BeliefRecord, EnvParts, COUNTER_POIS_FOUND, COUNTER_POIS_SAVED, COUNTER_STEPS,
    COUNTER_TILES_DISCOVERED,
};
use crate::error::{Error, Result};
use crate::layout::{AgentState, KnowledgeMode, PoiState, Tile, POI_FOUND, POI_SAVED};
use crate::map::MapSpec;
use crate::rng::EnvRng;

pub const RESCUE_RADIUS: f32 = 1.5;
pub const SAVE_RADIUS: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub r_tile: f32,
    pub r_found: f32,
    pub r_saved: f32,
}

impl RewardConfig {
    pub fn default_tile() -> f32 {
        0.01
    }
    pub fn default_found() -> f32 {
        1.0
    }
    pub fn default_saved() -> f32 {
        10.0
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_tile: Self::default_tile(),
            r_found: Self::default_found(),
            r_saved: Self::default_saved(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    /// Altitude at which an observer's view range doubles.
    pub alt_scale: f32,
    /// Terrain higher than the observer's tile by more than this occludes.
    pub eye_height: f32,
    /// Tiles per step for moving POIs.
    pub poi_speed: f32,
    /// Report a reward per agent instead of one team scalar.
    pub per_agent_rewards: bool,
}

impl DynamicsConfig {
    pub fn default_alt_scale() -> f32 {
        10.0
    }
    pub fn default_eye_height() -> f32 {
        1.0
    }
    pub fn default_poi_speed() -> f32 {
        1.0
    }
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            alt_scale: Self::default_alt_scale(),
            eye_height: Self::default_eye_height(),
            poi_speed: Self::default_poi_speed(),
            per_agent_rewards: false,
        }
    }
}

/// Movement vector plus radio target. `radio_target == own index` is silence.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Pod, Zeroable)]
pub struct AgentAction {
    pub ax: f32,
    pub ay: f32,
    pub radio_target: u32,
}

impl AgentAction {
    pub fn new(ax: f32, ay: f32, radio_target: u32) -> Self {
        Self { ax, ay, radio_target }
    }

    pub fn silent(agent: usize) -> Self {
        Self { ax: 0.0, ay: 0.0, radio_target: agent as u32 }
    }

    /// Components clamped to [-1, 1]; NaN becomes 0.
    pub fn clamped(&self) -> (f32, f32) {
        let c = |v: f32| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        (c(self.ax), c(self.ay))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepResult {
    pub reward: f32,
    pub terminated: bool,
    pub truncated: bool,
}

/// Per-map constants the step needs beyond what lives in the env bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Rules {
    pub width: usize,
    pub height: usize,
    pub n_agents: usize,
    pub n_pois: usize,
    pub n_types: usize,
    pub stuck_probability: Vec<f32>,
    pub rewards: RewardConfig,
    pub dynamics: DynamicsConfig,
    pub horizon: u32,
    pub knowledge: KnowledgeMode,
}

impl Rules {
    pub fn new(spec: &MapSpec, knowledge: KnowledgeMode) -> Self {
        Self {
            width: spec.width,
            height: spec.height,
            n_agents: spec.n_agents(),
            n_pois: spec.n_pois(),
            n_types: spec.n_types(),
            stuck_probability: spec.type_table.iter().map(|t| t.stuck_probability).collect(),
            rewards: spec.rewards,
            dynamics: spec.dynamics,
            horizon: spec.horizon,
            knowledge,
        }
    }

    pub fn n_tiles(&self) -> usize {
        self.width * self.height
    }

    /// Which belief an agent's sightings go to, if any.
    #[inline]
    pub fn belief_of(&self, agent: usize) -> Option<usize> {
        match self.knowledge {
            KnowledgeMode::None => None,
            KnowledgeMode::Shared => Some(0),
            KnowledgeMode::PerAgent => Some(agent),
        }
    }

    pub fn n_beliefs(&self) -> usize {
        match self.knowledge {
            KnowledgeMode::None => 0,
            KnowledgeMode::Shared => 1,
            KnowledgeMode::PerAgent => self.n_agents,
        }
    }
}

/// Reusable working memory for `step_env`. Sized once, never grown by a step.
#[derive(Debug, Clone)]
pub struct StepScratch {
    bitset_bytes: usize,
    /// Per agent: tiles visible this step as a bitset.
    visible_bits: Vec<u8>,
    /// Per agent: the same tiles as a list, in scan order.
    visible: Vec<Vec<u32>>,
    entered: Vec<bool>,
    stuck_snapshot: Vec<bool>,
    /// Reward earned by each agent this step.
    pub agent_rewards: Vec<f32>,
    /// Per belief: tiles that became known this step.
    pub newly_known: Vec<Vec<u32>>,
    /// Tiles whose global observed bit was set this step.
    pub newly_observed: Vec<u32>,
}

impl StepScratch {
    pub fn new(rules: &Rules) -> Self {
        let n = rules.n_tiles();
        let bitset_bytes = n.div_ceil(8);
        Self {
            bitset_bytes,
            visible_bits: vec![0; bitset_bytes * rules.n_agents],
            visible: (0..rules.n_agents).map(|_| Vec::with_capacity(n)).collect(),
            entered: vec![false; rules.n_agents],
            stuck_snapshot: vec![false; rules.n_agents],
            agent_rewards: vec![0.0; rules.n_agents],
            newly_known: (0..rules.n_beliefs()).map(|_| Vec::with_capacity(n)).collect(),
            newly_observed: Vec::with_capacity(n),
        }
    }

    fn clear(&mut self) {
        self.visible_bits.fill(0);
        self.visible.iter_mut().for_each(Vec::clear);
        self.entered.fill(false);
        self.agent_rewards.fill(0.0);
        self.newly_known.iter_mut().for_each(Vec::clear);
        self.newly_observed.clear();
    }

    /// Tiles agent `a` saw during the last step.
    pub fn visible(&self, a: usize) -> &[u32] {
        &self.visible[a]
    }

    #[inline]
    pub fn sees(&self, a: usize, tile: usize) -> bool {
        self.visible_bits[a * self.bitset_bytes + (tile >> 3)] & (1 << (tile & 7)) != 0
    }
}

#[inline]
fn occupiable(agent: &AgentState, tile: &Tile) -> bool {
    !tile.blocking()
        && ((agent.can_walk() && tile.walkable())
            || (agent.can_swim() && tile.aquatic())
            || (agent.can_fly() && tile.flyable() && tile.altitude <= agent.max_alt()))
}

/// Tiles per step for agent `index` standing on `tile`. Zero while stuck.
#[inline]
pub fn effective_speed(agent: &AgentState, index: usize, tile: &Tile, speeds: &[f32], n_types: usize) -> f32 {
    if agent.stuck() {
        0.0
    } else {
        speeds[index * n_types + tile.type_id()]
    }
}

/// Moves agent `a` by `(ax, ay)` scaled by its speed, x first then y. An axis
/// is dropped if it would leave the map or enter a tile the agent cannot
/// occupy. Returns true if the agent ends on a different tile.
pub fn apply_move(parts: &mut EnvParts, rules: &Rules, a: usize, ax: f32, ay: f32) -> bool {
    let w = rules.width;
    let agent = parts.agents[a];
    let (tx, ty) = agent.tile();
    let speed = effective_speed(&agent, a, &parts.grid[ty * w + tx], parts.speeds, rules.n_types);
    let (mut x, mut y) = (agent.x, agent.y);

    let nx = x + ax * speed;
    if nx >= 0.0 && (nx as usize) < w && occupiable(&agent, &parts.grid[ty * w + nx as usize]) {
        x = nx;
    }
    let ny = y + ay * speed;
    if ny >= 0.0 && (ny as usize) < rules.height && occupiable(&agent, &parts.grid[ny as usize * w + x as usize]) {
        y = ny;
    }

    let s = &mut parts.agents[a];
    s.last_x = tx as u16;
    s.last_y = ty as u16;
    s.x = x;
    s.y = y;
    (x as usize, y as usize) != (tx, ty)
}

fn dist2(ax: f32, ay: f32, bx: f32, by: f32) -> f32 {
    let (dx, dy) = (ax - bx, ay - by);
    dx * dx + dy * dy
}

/// Agents that entered a new tile may get stuck there; then every stuck agent
/// with a free, deployed teammate within the rescue radius is freed.
pub fn stuck_and_rescue(parts: &mut EnvParts, rules: &Rules, entered: &[bool], snapshot: &mut [bool], rng: &mut EnvRng) {
    let w = rules.width;
    for (a, &moved) in entered.iter().enumerate() {
        if moved {
            let (tx, ty) = parts.agents[a].tile();
            let p = rules.stuck_probability[parts.grid[ty * w + tx].type_id()];
            if rng.bernoulli(p) {
                parts.agents[a].set_stuck(true);
            }
        }
    }
    for (s, agent) in snapshot.iter_mut().zip(parts.agents.iter()) {
        *s = agent.stuck();
    }
    let r2 = RESCUE_RADIUS * RESCUE_RADIUS;
    for a in 0..parts.agents.len() {
        if !snapshot[a] {
            continue;
        }
        let me = parts.agents[a];
        let rescued = parts.agents.iter().enumerate().any(|(j, o)| {
            j != a && !snapshot[j] && o.deployed() && dist2(me.x, me.y, o.x, o.y) <= r2
        });
        if rescued {
            parts.agents[a].set_stuck(false);
        }
    }
}

/// True if nothing strictly between tile centers `(x0,y0)` and `(x1,y1)`
/// blocks the view. Walks the integer line between them.
pub fn line_of_sight(grid: &[Tile], width: usize, x0: i32, y0: i32, x1: i32, y1: i32, ceiling: f32) -> bool {
    if (x0, y0) == (x1, y1) {
        return true;
    }
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        if x == x1 && y == y1 {
            return true;
        }
        let t = &grid[y as usize * width + x as usize];
        if t.blocking() || t.altitude > ceiling {
            return false;
        }
    }
}

/// Effective view radius of an observer standing at `altitude`.
#[inline]
pub fn view_radius(view_range: f32, altitude: f32, alt_scale: f32) -> f32 {
    view_range * (1.0 + altitude / alt_scale)
}

/// Calls `visit(tile_index)` for every tile agent `a` can currently see,
/// in row-major order.
pub fn for_each_visible(grid: &[Tile], rules: &Rules, agent: &AgentState, mut visit: impl FnMut(usize)) {
    let w = rules.width as i32;
    let h = rules.height as i32;
    let (tx, ty) = agent.tile();
    let (tx, ty) = (tx as i32, ty as i32);
    let here = &grid[ty as usize * rules.width + tx as usize];
    let r = view_radius(agent.view_range, here.altitude, rules.dynamics.alt_scale);
    let ceiling = here.altitude + rules.dynamics.eye_height;
    let r2 = r * r;
    let reach = r.floor() as i32;
    for y in (ty - reach).max(0)..=(ty + reach).min(h - 1) {
        for x in (tx - reach).max(0)..=(tx + reach).min(w - 1) {
            let (dx, dy) = (x - tx, y - ty);
            if (dx * dx + dy * dy) as f32 > r2 {
                continue;
            }
            if line_of_sight(grid, rules.width, tx, ty, x, y, ceiling) {
                visit(y as usize * rules.width + x as usize);
            }
        }
    }
}

/// Marks everything agent `a` sees: its mask bit on each tile, the global
/// observed bit, its belief bitset, and belief records for POIs and teammates
/// standing on visible tiles. Returns the number of newly observed tiles.
pub fn compute_visibility(parts: &mut EnvParts, rules: &Rules, a: usize, scratch: &mut StepScratch) -> usize {
    let agent = parts.agents[a];
    let belief = rules.belief_of(a);
    let mut fresh = 0;
    let grid = &mut *parts.grid;
    let knowledge = &mut parts.knowledge;
    let mut hits = std::mem::take(&mut scratch.visible[a]);
    hits.clear();
    for_each_visible(grid, rules, &agent, |i| hits.push(i as u32));
    for &i in &hits {
        let i = i as usize;
        scratch.visible_bits[a * scratch.bitset_bytes + (i >> 3)] |= 1 << (i & 7);
        let t = &mut grid[i];
        t.mark_seen_by(a);
        if !t.observed() {
            t.set_observed();
            scratch.newly_observed.push(i as u32);
            fresh += 1;
        }
        if let Some(b) = belief {
            if knowledge.mark_known(b, i) {
                scratch.newly_known[b].push(i as u32);
            }
        }
    }
    scratch.visible[a] = hits;

    if let Some(b) = belief {
        let stamp = parts.counters[COUNTER_STEPS] as u32 + 1;
        for (p, poi) in parts.pois.iter().enumerate() {
            let (px, py) = poi.tile();
            if scratch.sees(a, py * rules.width + px) {
                knowledge.set_poi_record(b, p, BeliefRecord { x: px as u16, y: py as u16, stamp });
            }
        }
        for (j, other) in parts.agents.iter().enumerate() {
            let (ox, oy) = other.tile();
            if scratch.sees(a, oy * rules.width + ox) {
                knowledge.set_agent_record(b, j, BeliefRecord { x: ox as u16, y: oy as u16, stamp });
            }
        }
    }
    fresh
}

/// Sender shares its current view and its records with `target`. Only
/// per-agent beliefs are affected; shared or absent beliefs make it a no-op.
pub fn radio_broadcast(parts: &mut EnvParts, rules: &Rules, sender: usize, target: usize, scratch: &mut StepScratch) {
    if sender == target || rules.knowledge != KnowledgeMode::PerAgent {
        return;
    }
    let k = &mut parts.knowledge;
    for &i in &scratch.visible[sender] {
        if k.mark_known(target, i as usize) {
            scratch.newly_known[target].push(i);
        }
    }
    for p in 0..rules.n_pois {
        let theirs = k.poi_record(sender, p);
        if theirs.stamp > k.poi_record(target, p).stamp {
            k.set_poi_record(target, p, theirs);
        }
    }
    for j in 0..rules.n_agents {
        if j == target {
            continue;
        }
        let theirs = k.agent_record(sender, j);
        if theirs.stamp > k.agent_record(target, j).stamp {
            k.set_agent_record(target, j, theirs);
        }
    }
    let s = parts.agents[sender];
    let stamp = parts.counters[COUNTER_STEPS] as u32 + 1;
    k.set_agent_record(target, sender, BeliefRecord { x: s.x as u16, y: s.y as u16, stamp });
}

/// Finds POIs on tiles any agent sees this step, saves found POIs with an
/// eligible deployed agent within the save radius, then random-walks the
/// moving ones. Returns `(newly_found, newly_saved)`.
pub fn poi_update(parts: &mut EnvParts, rules: &Rules, rng: &mut EnvRng, scratch: &mut StepScratch) -> (u32, u32) {
    let w = rules.width;
    let (mut found, mut saved) = (0, 0);
    let r2 = SAVE_RADIUS * SAVE_RADIUS;
    for p in 0..parts.pois.len() {
        let mut poi = parts.pois[p];
        if poi.saved() {
            continue;
        }
        if !poi.found() {
            let (px, py) = poi.tile();
            if let Some(a) = (0..rules.n_agents).find(|&a| scratch.sees(a, py * w + px)) {
                poi.state_flags |= POI_FOUND;
                found += 1;
                scratch.agent_rewards[a] += rules.rewards.r_found;
            }
        }
        if poi.found() {
            let mask = poi.savable_by();
            let saver = parts.agents.iter().enumerate().position(|(a, s)| {
                mask & (1 << a) != 0 && s.deployed() && dist2(s.x, s.y, poi.x, poi.y) <= r2
            });
            if let Some(a) = saver {
                poi.state_flags |= POI_SAVED;
                saved += 1;
                scratch.agent_rewards[a] += rules.rewards.r_saved;
            }
        }
        if poi.moves() && !poi.saved() {
            step_poi(&mut poi, parts.grid, rules, rng);
        }
        parts.pois[p] = poi;
    }
    parts.counters[COUNTER_POIS_FOUND] += found as i32;
    parts.counters[COUNTER_POIS_SAVED] += saved as i32;
    (found, saved)
}

fn step_poi(poi: &mut PoiState, grid: &[Tile], rules: &Rules, rng: &mut EnvRng) {
    let v = rules.dynamics.poi_speed;
    let (dx, dy) = match rng.below(4) {
        0 => (v, 0.0),
        1 => (-v, 0.0),
        2 => (0.0, v),
        _ => (0.0, -v),
    };
    let (tx, ty) = poi.tile();
    poi.last_x = tx as u16;
    poi.last_y = ty as u16;
    let (nx, ny) = (poi.x + dx, poi.y + dy);
    if nx >= 0.0
        && ny >= 0.0
        && (nx as usize) < rules.width
        && (ny as usize) < rules.height
        && !grid[ny as usize * rules.width + nx as usize].blocking()
    {
        poi.x = nx;
        poi.y = ny;
    }
}

/// Advances one environment by one step.
///
/// `scratch` is left holding this step's per-agent rewards, visible sets and
/// newly known tiles for the observation fill.
pub fn step_env(
    parts: &mut EnvParts,
    rules: &Rules,
    actions: &[AgentAction],
    rng: &mut EnvRng,
    scratch: &mut StepScratch,
) -> Result<StepResult> {
    let n = rules.n_agents;
    if actions.len() != n {
        return Err(Error::contract(format!("expected {n} actions, got {}", actions.len())));
    }
    if let Some(bad) = actions.iter().find(|a| a.radio_target as usize >= n) {
        return Err(Error::contract(format!("radio target {} out of range for {n} agents", bad.radio_target)));
    }
    scratch.clear();

    for agent in parts.agents.iter_mut() {
        if agent.deployment_remaining > 0.0 {
            agent.deployment_remaining = (agent.deployment_remaining - 1.0).max(0.0);
        }
    }

    for (a, action) in actions.iter().enumerate() {
        let agent = &parts.agents[a];
        if agent.deployed() && !agent.stuck() {
            let (ax, ay) = action.clamped();
            scratch.entered[a] = apply_move(parts, rules, a, ax, ay);
        }
    }

    let mut snapshot = std::mem::take(&mut scratch.stuck_snapshot);
    stuck_and_rescue(parts, rules, &scratch.entered, &mut snapshot, rng);
    scratch.stuck_snapshot = snapshot;

    let mut observed_by = [0u32; crate::layout::MAX_AGENTS];
    for a in 0..n {
        if parts.agents[a].deployed() {
            observed_by[a] = compute_visibility(parts, rules, a, scratch) as u32;
        }
    }
    let new_tiles: u32 = observed_by[..n].iter().sum();
    parts.counters[COUNTER_TILES_DISCOVERED] += new_tiles as i32;

    for (a, action) in actions.iter().enumerate() {
        if parts.agents[a].deployed() {
            radio_broadcast(parts, rules, a, action.radio_target as usize, scratch);
        }
    }

    let (found, saved) = poi_update(parts, rules, rng, scratch);

    let r = rules.rewards;
    for a in 0..n {
        scratch.agent_rewards[a] += r.r_tile * observed_by[a] as f32;
    }
    let reward = r.r_tile * new_tiles as f32 + r.r_found * found as f32 + r.r_saved * saved as f32;

    parts.counters[COUNTER_STEPS] += 1;
    let terminated = parts.pois.iter().all(|p| p.saved());
    let truncated = !terminated && parts.counters[COUNTER_STEPS] as u32 >= rules.horizon;
    Ok(StepResult { reward, terminated, truncated })
}
