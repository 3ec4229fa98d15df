//! Naive reference model. Plain structs, booleans instead of bit fields, a
//! brute-force scan over every tile for visibility. It follows the same rules
//! and makes the same random draws in the same order as the engine, so the two
//! can be compared bit for bit.

use seekworld::env::{
    EnvView, COUNTER_POIS_FOUND, COUNTER_POIS_SAVED, COUNTER_STEPS, COUNTER_TILES_DISCOVERED,
};
use seekworld::map::{MapSpec, Spawn, TileTypeDef};
use seekworld::{AgentAction, EnvRng, KnowledgeMode, ObsLayout, ObsMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub x: f32,
    pub y: f32,
    pub view_range: f32,
    pub deployment: f32,
    pub last: (usize, usize),
    pub stuck: bool,
    pub walk: bool,
    pub fly: bool,
    pub swim: bool,
    pub max_alt: f32,
}

impl Agent {
    pub fn tile(&self) -> (usize, usize) {
        (self.x.floor() as usize, self.y.floor() as usize)
    }
    pub fn deployed(&self) -> bool {
        self.deployment <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub x: f32,
    pub y: f32,
    pub last: (usize, usize),
    pub found: bool,
    pub saved: bool,
    pub moves: bool,
    pub savable_by: Vec<bool>,
}

impl Poi {
    pub fn tile(&self) -> (usize, usize) {
        (self.x.floor() as usize, self.y.floor() as usize)
    }
}

/// A sighting; `None` when never seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sighting {
    pub x: usize,
    pub y: usize,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub known: Vec<bool>,
    pub pois: Vec<Option<Sighting>>,
    pub agents: Vec<Option<Sighting>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub agents: Vec<Agent>,
    pub pois: Vec<Poi>,
    /// `seen_by[tile][agent]`.
    pub seen_by: Vec<Vec<bool>>,
    pub observed: Vec<bool>,
    pub beliefs: Vec<Belief>,
    pub steps: u32,
    pub tiles_discovered: i32,
    pub pois_found: i32,
    pub pois_saved: i32,
}

impl State {
    /// Reads the engine's packed env into plain form, checking the packing
    /// invariants on the way.
    pub fn from_engine(env: &EnvView, spec: &MapSpec) -> State {
        let n = spec.n_agents();
        let grid = env.grid();
        for (i, t) in grid.iter().enumerate() {
            let def = &spec.type_table[spec.grid[i] as usize];
            assert_eq!(t.type_id(), def.type_id as usize, "tile {i} type");
            assert_eq!(t.walkable(), def.walkable, "tile {i} walkable");
            assert_eq!(t.flyable(), def.flyable, "tile {i} flyable");
            assert_eq!(t.aquatic(), def.aquatic, "tile {i} aquatic");
            assert_eq!(t.blocking(), def.blocking, "tile {i} blocking");
            assert_eq!(t.altitude.to_bits(), def.altitude.to_bits(), "tile {i} altitude");
            assert_eq!(t.visibility_mask() >> n, 0, "tile {i} has mask bits past the agent count");
        }
        let agents = env
            .agents()
            .iter()
            .map(|a| {
                assert_eq!(a.pad, 0, "agent pad byte");
                assert_eq!(a.flags >> 4, 0, "agent reserved flag bits");
                Agent {
                    x: a.x,
                    y: a.y,
                    view_range: a.view_range,
                    deployment: a.deployment_remaining,
                    last: (a.last_x as usize, a.last_y as usize),
                    stuck: a.stuck(),
                    walk: a.can_walk(),
                    fly: a.can_fly(),
                    swim: a.can_swim(),
                    max_alt: a.max_alt(),
                }
            })
            .collect();
        let pois = env
            .pois()
            .iter()
            .map(|p| {
                assert_eq!(p.state_flags >> 23, 0, "POI reserved bits");
                assert!(!p.saved() || p.found(), "saved implies found");
                Poi {
                    x: p.x,
                    y: p.y,
                    last: (p.last_x as usize, p.last_y as usize),
                    found: p.found(),
                    saved: p.saved(),
                    moves: p.moves(),
                    savable_by: (0..n).map(|a| p.savable_by() & (1 << a) != 0).collect(),
                }
            })
            .collect();
        let k = env.knowledge();
        let sighting = |r: seekworld::env::BeliefRecord| {
            r.known().then(|| Sighting { x: r.x as usize, y: r.y as usize, step: r.stamp - 1 })
        };
        let beliefs = (0..k.n_beliefs())
            .map(|b| Belief {
                known: (0..grid.len()).map(|i| k.known(b, i)).collect(),
                pois: (0..spec.n_pois()).map(|p| sighting(k.poi_record(b, p))).collect(),
                agents: (0..n).map(|j| sighting(k.agent_record(b, j))).collect(),
            })
            .collect();
        let c = env.counters();
        State {
            agents,
            pois,
            seen_by: grid.iter().map(|t| (0..n).map(|a| t.seen_by(a)).collect()).collect(),
            observed: grid.iter().map(|t| t.observed()).collect(),
            beliefs,
            steps: c[COUNTER_STEPS] as u32,
            tiles_discovered: c[COUNTER_TILES_DISCOVERED],
            pois_found: c[COUNTER_POIS_FOUND],
            pois_saved: c[COUNTER_POIS_SAVED],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub reward: f32,
    pub found: u32,
    pub saved: u32,
    pub got_stuck: u32,
    pub terminated: bool,
    pub truncated: bool,
}

pub struct RefEnv<'s> {
    pub spec: &'s MapSpec,
    pub knowledge: KnowledgeMode,
    pub state: State,
    /// Tiles each agent saw during the last step, as a per-tile flag.
    pub visible: Vec<Vec<bool>>,
    pub agent_rewards: Vec<f32>,
}

fn can_enter(agent: &Agent, t: &TileTypeDef) -> bool {
    if t.blocking {
        return false;
    }
    (agent.walk && t.walkable) || (agent.swim && t.aquatic) || (agent.fly && t.flyable && t.altitude <= agent.max_alt)
}

fn clamp_component(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else if v > 1.0 {
        1.0
    } else if v < -1.0 {
        -1.0
    } else {
        v
    }
}

fn sq_dist(ax: f32, ay: f32, bx: f32, by: f32) -> f32 {
    let dx = ax - bx;
    let dy = ay - by;
    dx * dx + dy * dy
}

/// Every cell on the integer line from `(x0,y0)` to `(x1,y1)`, both ends
/// included.
pub fn line_cells(x0: i32, y0: i32, x1: i32, y1: i32) -> Vec<(i32, i32)> {
    let mut cells = vec![(x0, y0)];
    let dx = (x1 - x0).abs();
    let dy = (y1 - y0).abs();
    let sx = (x1 - x0).signum();
    let sy = (y1 - y0).signum();
    let mut err = dx - dy;
    let (mut x, mut y) = (x0, y0);
    while (x, y) != (x1, y1) {
        let twice = 2 * err;
        if twice >= -dy {
            err -= dy;
            x += sx;
        }
        if twice <= dx {
            err += dx;
            y += sy;
        }
        cells.push((x, y));
    }
    cells
}

impl<'s> RefEnv<'s> {
    fn n_beliefs(spec: &MapSpec, knowledge: KnowledgeMode) -> usize {
        match knowledge {
            KnowledgeMode::None => 0,
            KnowledgeMode::Shared => 1,
            KnowledgeMode::PerAgent => spec.n_agents(),
        }
    }

    /// Fresh episode with spawns drawn from `rng`.
    pub fn reset(spec: &'s MapSpec, knowledge: KnowledgeMode, rng: &mut EnvRng) -> Self {
        let n = spec.n_agents();
        let n_tiles = spec.width * spec.height;
        let mut agents = Vec::new();
        for def in &spec.agents {
            let mut agent = Agent {
                x: 0.0,
                y: 0.0,
                view_range: def.view_range,
                deployment: def.deployment,
                last: (0, 0),
                stuck: false,
                walk: def.capabilities.walk,
                fly: def.capabilities.fly,
                swim: def.capabilities.swim,
                max_alt: def.stored_max_alt(),
            };
            let (x, y) = match def.spawn {
                Spawn::At { x, y } => (x as usize, y as usize),
                Spawn::Random => {
                    let mut options = Vec::new();
                    for y in 0..spec.height {
                        for x in 0..spec.width {
                            if can_enter(&agent, spec.tile_type(x, y)) {
                                options.push((x, y));
                            }
                        }
                    }
                    options[rng.below(options.len())]
                }
            };
            agent.x = x as f32 + 0.5;
            agent.y = y as f32 + 0.5;
            agent.last = (x, y);
            agents.push(agent);
        }
        let mut pois = Vec::new();
        for def in &spec.pois {
            let (x, y) = match def.spawn {
                Spawn::At { x, y } => (x as usize, y as usize),
                Spawn::Random => {
                    let mut options = Vec::new();
                    for y in 0..spec.height {
                        for x in 0..spec.width {
                            if !spec.tile_type(x, y).blocking {
                                options.push((x, y));
                            }
                        }
                    }
                    options[rng.below(options.len())]
                }
            };
            pois.push(Poi {
                x: x as f32 + 0.5,
                y: y as f32 + 0.5,
                last: (x, y),
                found: false,
                saved: false,
                moves: def.moves,
                savable_by: (0..n).map(|a| def.savable_by & (1 << a) != 0).collect(),
            });
        }
        let beliefs = (0..Self::n_beliefs(spec, knowledge))
            .map(|_| Belief {
                known: vec![false; n_tiles],
                pois: vec![None; spec.n_pois()],
                agents: vec![None; n],
            })
            .collect();
        RefEnv {
            spec,
            knowledge,
            state: State {
                agents,
                pois,
                seen_by: vec![vec![false; n]; n_tiles],
                observed: vec![false; n_tiles],
                beliefs,
                steps: 0,
                tiles_discovered: 0,
                pois_found: 0,
                pois_saved: 0,
            },
            visible: vec![vec![false; n_tiles]; n],
            agent_rewards: vec![0.0; n],
        }
    }

    fn belief_of(&self, agent: usize) -> Option<usize> {
        match self.knowledge {
            KnowledgeMode::None => None,
            KnowledgeMode::Shared => Some(0),
            KnowledgeMode::PerAgent => Some(agent),
        }
    }

    /// Tiles `agent` can see right now, by checking every tile on the map.
    pub fn visible_tiles(&self, agent: usize) -> Vec<bool> {
        let spec = self.spec;
        let a = &self.state.agents[agent];
        let (ax, ay) = a.tile();
        let here = spec.tile_type(ax, ay).altitude;
        let radius = a.view_range * (1.0 + here / spec.dynamics.alt_scale);
        let ceiling = here + spec.dynamics.eye_height;
        let mut out = vec![false; spec.width * spec.height];
        for y in 0..spec.height {
            for x in 0..spec.width {
                let dx = x as i64 - ax as i64;
                let dy = y as i64 - ay as i64;
                if ((dx * dx + dy * dy) as f32) > radius * radius {
                    continue;
                }
                let cells = line_cells(ax as i32, ay as i32, x as i32, y as i32);
                let inner = &cells[1..cells.len().saturating_sub(1).max(1)];
                let clear = inner.iter().all(|&(cx, cy)| {
                    let t = spec.tile_type(cx as usize, cy as usize);
                    !t.blocking && t.altitude <= ceiling
                });
                if clear {
                    out[y * spec.width + x] = true;
                }
            }
        }
        out
    }

    fn try_move(&mut self, a: usize, ax: f32, ay: f32) -> bool {
        let spec = self.spec;
        let agent = self.state.agents[a].clone();
        let (tx, ty) = agent.tile();
        let speed = if agent.stuck { 0.0 } else { spec.speed(a, spec.grid[ty * spec.width + tx] as usize) };
        let mut x = agent.x;
        let mut y = agent.y;
        let nx = x + ax * speed;
        if nx >= 0.0 && nx.floor() < spec.width as f32 && can_enter(&agent, spec.tile_type(nx.floor() as usize, ty)) {
            x = nx;
        }
        let ny = y + ay * speed;
        if ny >= 0.0
            && ny.floor() < spec.height as f32
            && can_enter(&agent, spec.tile_type(x.floor() as usize, ny.floor() as usize))
        {
            y = ny;
        }
        let s = &mut self.state.agents[a];
        s.last = (tx, ty);
        s.x = x;
        s.y = y;
        s.tile() != (tx, ty)
    }

    /// One step. Returns the team reward and done flags.
    pub fn step(&mut self, actions: &[AgentAction], rng: &mut EnvRng) -> Outcome {
        let spec = self.spec;
        let n = spec.n_agents();
        let w = spec.width;
        assert_eq!(actions.len(), n);
        self.agent_rewards = vec![0.0; n];
        for v in &mut self.visible {
            v.iter_mut().for_each(|b| *b = false);
        }

        for agent in &mut self.state.agents {
            if agent.deployment > 0.0 {
                agent.deployment = (agent.deployment - 1.0).max(0.0);
            }
        }

        let mut entered = vec![false; n];
        for a in 0..n {
            let ag = &self.state.agents[a];
            if ag.deployed() && !ag.stuck {
                let ax = clamp_component(actions[a].ax);
                let ay = clamp_component(actions[a].ay);
                entered[a] = self.try_move(a, ax, ay);
            }
        }

        let mut got_stuck = 0;
        for a in 0..n {
            if entered[a] {
                let (x, y) = self.state.agents[a].tile();
                if rng.bernoulli(spec.tile_type(x, y).stuck_probability) {
                    self.state.agents[a].stuck = true;
                    got_stuck += 1;
                }
            }
        }
        let was_stuck: Vec<bool> = self.state.agents.iter().map(|a| a.stuck).collect();
        for a in 0..n {
            if !was_stuck[a] {
                continue;
            }
            let me = self.state.agents[a].clone();
            let helper = (0..n).any(|j| {
                let o = &self.state.agents[j];
                j != a && !was_stuck[j] && o.deployed() && sq_dist(me.x, me.y, o.x, o.y) <= 1.5 * 1.5
            });
            if helper {
                self.state.agents[a].stuck = false;
            }
        }

        let stamp_step = self.state.steps;
        let mut new_by = vec![0u32; n];
        for a in 0..n {
            if !self.state.agents[a].deployed() {
                continue;
            }
            let vis = self.visible_tiles(a);
            for i in 0..vis.len() {
                if !vis[i] {
                    continue;
                }
                self.state.seen_by[i][a] = true;
                if !self.state.observed[i] {
                    self.state.observed[i] = true;
                    new_by[a] += 1;
                }
                if let Some(b) = self.belief_of(a) {
                    self.state.beliefs[b].known[i] = true;
                }
            }
            if let Some(b) = self.belief_of(a) {
                for p in 0..spec.n_pois() {
                    let (px, py) = self.state.pois[p].tile();
                    if vis[py * w + px] {
                        self.state.beliefs[b].pois[p] = Some(Sighting { x: px, y: py, step: stamp_step });
                    }
                }
                for j in 0..n {
                    let (ox, oy) = self.state.agents[j].tile();
                    if vis[oy * w + ox] {
                        self.state.beliefs[b].agents[j] = Some(Sighting { x: ox, y: oy, step: stamp_step });
                    }
                }
            }
            self.visible[a] = vis;
        }
        let new_tiles: u32 = new_by.iter().sum();
        self.state.tiles_discovered += new_tiles as i32;

        if self.knowledge == KnowledgeMode::PerAgent {
            for s in 0..n {
                let t = actions[s].radio_target as usize;
                if !self.state.agents[s].deployed() || t == s {
                    continue;
                }
                for i in 0..spec.width * spec.height {
                    if self.visible[s][i] {
                        self.state.beliefs[t].known[i] = true;
                    }
                }
                let newer = |theirs: Option<Sighting>, mine: Option<Sighting>| match (theirs, mine) {
                    (Some(a), Some(b)) => a.step > b.step,
                    (Some(_), None) => true,
                    _ => false,
                };
                for p in 0..spec.n_pois() {
                    let theirs = self.state.beliefs[s].pois[p];
                    if newer(theirs, self.state.beliefs[t].pois[p]) {
                        self.state.beliefs[t].pois[p] = theirs;
                    }
                }
                for j in 0..n {
                    if j == t {
                        continue;
                    }
                    let theirs = self.state.beliefs[s].agents[j];
                    if newer(theirs, self.state.beliefs[t].agents[j]) {
                        self.state.beliefs[t].agents[j] = theirs;
                    }
                }
                let (sx, sy) = self.state.agents[s].tile();
                self.state.beliefs[t].agents[s] = Some(Sighting { x: sx, y: sy, step: stamp_step });
            }
        }

        let r = spec.rewards;
        let (mut found, mut saved) = (0u32, 0u32);
        for p in 0..spec.n_pois() {
            if self.state.pois[p].saved {
                continue;
            }
            if !self.state.pois[p].found {
                let (px, py) = self.state.pois[p].tile();
                if let Some(a) = (0..n).find(|&a| self.visible[a][py * w + px]) {
                    self.state.pois[p].found = true;
                    found += 1;
                    self.agent_rewards[a] += r.r_found;
                }
            }
            if self.state.pois[p].found {
                let poi = self.state.pois[p].clone();
                let saver = (0..n).find(|&a| {
                    let ag = &self.state.agents[a];
                    poi.savable_by[a] && ag.deployed() && sq_dist(ag.x, ag.y, poi.x, poi.y) <= 0.5 * 0.5
                });
                if let Some(a) = saver {
                    self.state.pois[p].saved = true;
                    saved += 1;
                    self.agent_rewards[a] += r.r_saved;
                }
            }
            if self.state.pois[p].moves && !self.state.pois[p].saved {
                let v = spec.dynamics.poi_speed;
                let dir = rng.below(4);
                let (dx, dy) = [(v, 0.0), (-v, 0.0), (0.0, v), (0.0, -v)][dir];
                let poi = &mut self.state.pois[p];
                poi.last = poi.tile();
                let nx = poi.x + dx;
                let ny = poi.y + dy;
                let inside = nx >= 0.0 && ny >= 0.0 && nx.floor() < spec.width as f32 && ny.floor() < spec.height as f32;
                if inside && !spec.tile_type(nx.floor() as usize, ny.floor() as usize).blocking {
                    poi.x = nx;
                    poi.y = ny;
                }
            }
        }
        self.state.pois_found += found as i32;
        self.state.pois_saved += saved as i32;

        for a in 0..n {
            self.agent_rewards[a] += r.r_tile * new_by[a] as f32;
        }
        let reward = r.r_tile * new_tiles as f32 + r.r_found * found as f32 + r.r_saved * saved as f32;

        self.state.steps += 1;
        let terminated = self.state.pois.iter().all(|p| p.saved);
        let truncated = !terminated && self.state.steps >= spec.horizon;
        Outcome { reward, found, saved, got_stuck, terminated, truncated }
    }

    /// Random action the pool's desync phase draws: move x, move y, radio.
    pub fn random_action(rng: &mut EnvRng, n: usize) -> AgentAction {
        let ax = rng.next_f32() * 2.0 - 1.0;
        let ay = rng.next_f32() * 2.0 - 1.0;
        let t = rng.below(n);
        AgentAction { ax, ay, radio_target: t as u32 }
    }

    /// Reset followed by the pool's optional desync pre-roll.
    pub fn pool_reset(spec: &'s MapSpec, knowledge: KnowledgeMode, desync: bool, rng: &mut EnvRng) -> Self {
        let mut env = Self::reset(spec, knowledge, rng);
        if desync {
            let k = rng.below(spec.horizon as usize);
            for _ in 0..k {
                let acts: Vec<_> = (0..spec.n_agents()).map(|_| Self::random_action(rng, spec.n_agents())).collect();
                let o = env.step(&acts, rng);
                if o.terminated || o.truncated {
                    env = Self::reset(spec, knowledge, rng);
                    break;
                }
            }
            env.state.tiles_discovered = 0;
            env.state.pois_found = 0;
            env.state.pois_saved = 0;
        }
        env
    }

    // -- observation fills, one channel at a time --

    fn known_any(&self, i: usize) -> bool {
        self.state.beliefs.iter().any(|b| b.known[i])
    }

    fn static_value(&self, ol: &ObsLayout, c: usize, x: usize, y: usize) -> f32 {
        let t = self.spec.tile_type(x, y);
        if c < ol.n_types {
            (t.type_id as usize == c) as u8 as f32
        } else if c == ol.n_types {
            t.altitude
        } else {
            unreachable!()
        }
    }

    fn other_channel(ol: &ObsLayout, viewer: usize, j: usize) -> usize {
        let base = ol.n_types + 4;
        if ol.merge_others {
            base
        } else if j < viewer {
            base + j
        } else {
            base + j - 1
        }
    }

    /// Partial image of agent `a` from its own belief.
    pub fn decentralized_image(&self, a: usize, ol: &ObsLayout) -> Vec<f32> {
        let belief = &self.state.beliefs[a];
        let mut img = vec![0.0; ol.image_len()];
        let plane = ol.width * ol.height;
        for c in 0..ol.n_channels() {
            for y in 0..ol.height {
                for x in 0..ol.width {
                    let i = y * ol.width + x;
                    let v = if c <= ol.n_types {
                        if belief.known[i] {
                            self.static_value(ol, c, x, y)
                        } else {
                            0.0
                        }
                    } else if c == ol.n_types + 1 {
                        let hit = (0..self.spec.n_pois()).any(|p| {
                            !self.state.pois[p].saved && belief.pois[p].is_some_and(|s| (s.x, s.y) == (x, y))
                        });
                        hit as u8 as f32
                    } else if c == ol.n_types + 2 {
                        belief.known[i] as u8 as f32
                    } else if c == ol.n_types + 3 {
                        (self.state.agents[a].tile() == (x, y)) as u8 as f32
                    } else {
                        let hit = (0..self.spec.n_agents()).any(|j| {
                            j != a
                                && Self::other_channel(ol, a, j) == c
                                && belief.agents[j].is_some_and(|s| (s.x, s.y) == (x, y))
                        });
                        hit as u8 as f32
                    };
                    img[c * plane + i] = v;
                }
            }
        }
        img
    }

    pub fn logical(&self, a: usize) -> [f32; 6] {
        let s = &self.state.agents[a];
        [s.x, s.y, s.view_range, s.deployment, s.stuck as u8 as f32, self.state.steps as f32 / self.spec.horizon as f32]
    }

    fn location_value(&self, ol: &ObsLayout, c: usize, x: usize, y: usize) -> f32 {
        let hit = (0..self.spec.n_agents()).any(|j| {
            let ch = if j == 0 { ol.n_types + 3 } else { Self::other_channel(ol, 0, j) };
            ch == c && self.state.agents[j].tile() == (x, y)
        });
        hit as u8 as f32
    }

    /// The team's fused image: union of all beliefs, true agent locations.
    pub fn centralized_image(&self, ol: &ObsLayout) -> Vec<f32> {
        let mut img = vec![0.0; ol.image_len()];
        let plane = ol.width * ol.height;
        for c in 0..ol.n_channels() {
            for y in 0..ol.height {
                for x in 0..ol.width {
                    let i = y * ol.width + x;
                    let v = if c <= ol.n_types {
                        if self.known_any(i) {
                            self.static_value(ol, c, x, y)
                        } else {
                            0.0
                        }
                    } else if c == ol.n_types + 1 {
                        let hit = (0..self.spec.n_pois()).any(|p| {
                            let latest = self
                                .state
                                .beliefs
                                .iter()
                                .filter_map(|b| b.pois[p])
                                .max_by_key(|s| s.step);
                            !self.state.pois[p].saved && latest.is_some_and(|s| (s.x, s.y) == (x, y))
                        });
                        hit as u8 as f32
                    } else if c == ol.n_types + 2 {
                        self.known_any(i) as u8 as f32
                    } else {
                        self.location_value(ol, c, x, y)
                    };
                    img[c * plane + i] = v;
                }
            }
        }
        img
    }

    /// Omniscient image.
    pub fn true_state_image(&self, ol: &ObsLayout) -> Vec<f32> {
        let mut img = vec![0.0; ol.image_len()];
        let plane = ol.width * ol.height;
        for c in 0..ol.n_channels() {
            for y in 0..ol.height {
                for x in 0..ol.width {
                    let i = y * ol.width + x;
                    let v = if c <= ol.n_types {
                        self.static_value(ol, c, x, y)
                    } else if c == ol.n_types + 1 {
                        let hit = self.state.pois.iter().any(|p| !p.saved && p.tile() == (x, y));
                        hit as u8 as f32
                    } else if c == ol.n_types + 2 {
                        self.state.observed[i] as u8 as f32
                    } else {
                        self.location_value(ol, c, x, y)
                    };
                    img[c * plane + i] = v;
                }
            }
        }
        img
    }

    /// What a pool in `mode` should hold for this env:
    /// `(obs images, logical, state image)`, each empty when absent.
    pub fn expected_outputs(&self, mode: ObsMode, ol: &ObsLayout) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
        let n = self.spec.n_agents();
        let (mut obs, mut logical, mut state) = (Vec::new(), Vec::new(), Vec::new());
        match mode {
            ObsMode::DecentralizedNoState | ObsMode::DecentralizedWithState => {
                for a in 0..n {
                    obs.extend(self.decentralized_image(a, ol));
                    logical.extend(self.logical(a));
                }
            }
            ObsMode::CentralizedNoState | ObsMode::CentralizedWithState => obs = self.centralized_image(ol),
            _ => {}
        }
        if matches!(mode, ObsMode::DecentralizedWithState | ObsMode::CentralizedWithState | ObsMode::StateOnly) {
            state = self.true_state_image(ol);
        }
        (obs, logical, state)
    }
}
