//! Observation tensors. Every image is `[channel, row, column]` f32 with the
//! channels
//!
//! ```text
//! tile types (n_types, one-hot) | altitude | detected POIs | discovery |
//! self location | other agents (n_agents - 1, or 1 when merged)
//! ```
//!
//! Fused and true-state images reuse the same layout with the location planes
//! holding agent 0 in the self plane and agents 1.. in the others planes.

use crate::dynamics::StepScratch;
use crate::env::{BeliefRecord, EnvView};
use crate::error::{Error, Result};
use crate::layout::KnowledgeMode;

/// Floats in the per-agent logical vector:
/// `[x, y, view_range, deployment_remaining, stuck, steps_elapsed / horizon]`.
pub const LOGICAL_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObsMode {
    /// One partial image and logical vector per agent.
    #[default]
    DecentralizedNoState,
    /// Per-agent partial images plus the true state image.
    DecentralizedWithState,
    /// One fused partial image for the team.
    CentralizedNoState,
    /// Fused partial image plus the true state image.
    CentralizedWithState,
    /// Only the true state image.
    StateOnly,
    /// No observations at all.
    Void,
}

impl ObsMode {
    pub const ALL: [ObsMode; 6] = [
        ObsMode::DecentralizedNoState,
        ObsMode::DecentralizedWithState,
        ObsMode::CentralizedNoState,
        ObsMode::CentralizedWithState,
        ObsMode::StateOnly,
        ObsMode::Void,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObsMode::DecentralizedNoState => "decentralized",
            ObsMode::DecentralizedWithState => "decentralized-state",
            ObsMode::CentralizedNoState => "centralized",
            ObsMode::CentralizedWithState => "centralized-state",
            ObsMode::StateOnly => "state-only",
            ObsMode::Void => "void",
        }
    }

    pub fn knowledge(&self) -> KnowledgeMode {
        match self {
            ObsMode::DecentralizedNoState | ObsMode::DecentralizedWithState => KnowledgeMode::PerAgent,
            ObsMode::CentralizedNoState | ObsMode::CentralizedWithState => KnowledgeMode::Shared,
            ObsMode::StateOnly | ObsMode::Void => KnowledgeMode::None,
        }
    }

    pub fn is_decentralized(&self) -> bool {
        matches!(self, ObsMode::DecentralizedNoState | ObsMode::DecentralizedWithState)
    }

    /// Partial images written per env: one per agent, one fused, or none.
    pub fn n_obs_images(&self, n_agents: usize) -> usize {
        match self {
            ObsMode::DecentralizedNoState | ObsMode::DecentralizedWithState => n_agents,
            ObsMode::CentralizedNoState | ObsMode::CentralizedWithState => 1,
            ObsMode::StateOnly | ObsMode::Void => 0,
        }
    }

    pub fn has_logical(&self) -> bool {
        self.is_decentralized()
    }

    pub fn has_state(&self) -> bool {
        matches!(
            self,
            ObsMode::DecentralizedWithState | ObsMode::CentralizedWithState | ObsMode::StateOnly
        )
    }
}

impl std::fmt::Display for ObsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ObsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ObsMode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = ObsMode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode {s:?} (expected one of {})", names.join(", "))
            })
    }
}

/// Channel offsets and sizes of one observation image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsLayout {
    pub width: usize,
    pub height: usize,
    pub n_types: usize,
    pub n_agents: usize,
    pub merge_others: bool,
}

impl ObsLayout {
    pub fn new(width: usize, height: usize, n_types: usize, n_agents: usize, merge_others: bool) -> Self {
        Self { width, height, n_types, n_agents, merge_others }
    }

    pub fn plane(&self) -> usize {
        self.width * self.height
    }
    pub fn ch_types(&self) -> usize {
        0
    }
    pub fn ch_altitude(&self) -> usize {
        self.n_types
    }
    pub fn ch_pois(&self) -> usize {
        self.n_types + 1
    }
    pub fn ch_discovery(&self) -> usize {
        self.n_types + 2
    }
    pub fn ch_self(&self) -> usize {
        self.n_types + 3
    }
    pub fn ch_others(&self) -> usize {
        self.n_types + 4
    }
    pub fn n_other_planes(&self) -> usize {
        if self.merge_others {
            1
        } else {
            self.n_agents - 1
        }
    }
    pub fn n_channels(&self) -> usize {
        self.ch_others() + self.n_other_planes()
    }
    /// Floats in one image.
    pub fn image_len(&self) -> usize {
        self.n_channels() * self.plane()
    }
    pub fn shape(&self) -> [usize; 3] {
        [self.n_channels(), self.height, self.width]
    }

    /// Other-agents plane for teammate `j` as seen from `viewer`; for fused
    /// images pass `viewer = 0`.
    #[inline]
    fn other_plane(&self, viewer: usize, j: usize) -> usize {
        if self.merge_others {
            self.ch_others()
        } else {
            self.ch_others() + if j < viewer { j } else { j - 1 }
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::contract(format!("{what} buffer has {got} floats, expected {want}")));
    }
    Ok(())
}

#[inline]
fn put(img: &mut [f32], ol: &ObsLayout, ch: usize, x: usize, y: usize, v: f32) {
    img[ch * ol.plane() + y * ol.width + x] = v;
}

/// Writes type one-hot, altitude and discovery for every tile `known` accepts,
/// in one row-major pass.
fn fill_static<F: Fn(usize) -> bool>(env: &EnvView, ol: &ObsLayout, img: &mut [f32], known: F) {
    let plane = ol.plane();
    let (alt, disc) = (ol.ch_altitude() * plane, ol.ch_discovery() * plane);
    for (i, t) in env.grid().iter().enumerate() {
        if known(i) {
            img[t.type_id() * plane + i] = 1.0;
            img[alt + i] = t.altitude;
            img[disc + i] = 1.0;
        }
    }
}

fn write_tile(env: &EnvView, ol: &ObsLayout, img: &mut [f32], i: usize) {
    let plane = ol.plane();
    let t = &env.grid()[i];
    img[t.type_id() * plane + i] = 1.0;
    img[ol.ch_altitude() * plane + i] = t.altitude;
    img[ol.ch_discovery() * plane + i] = 1.0;
}

fn write_logical(env: &EnvView, agent: usize, horizon: u32, out: &mut [f32]) {
    let s = &env.agents()[agent];
    out.copy_from_slice(&[
        s.x,
        s.y,
        s.view_range,
        s.deployment_remaining,
        if s.stuck() { 1.0 } else { 0.0 },
        env.steps_elapsed() as f32 / horizon as f32,
    ]);
}

/// Dynamic planes of a per-agent image: POI sightings, own position and
/// teammates' last known positions from belief `agent`.
fn dynamic_decentralized(env: &EnvView, agent: usize, ol: &ObsLayout, img: &mut [f32]) {
    let k = env.knowledge();
    for (p, poi) in env.pois().iter().enumerate() {
        let r = k.poi_record(agent, p);
        if r.known() && !poi.saved() {
            put(img, ol, ol.ch_pois(), r.x as usize, r.y as usize, 1.0);
        }
    }
    let (x, y) = env.agents()[agent].tile();
    put(img, ol, ol.ch_self(), x, y, 1.0);
    for j in (0..ol.n_agents).filter(|&j| j != agent) {
        let r = k.agent_record(agent, j);
        if r.known() {
            put(img, ol, ol.other_plane(agent, j), r.x as usize, r.y as usize, 1.0);
        }
    }
}

/// True agent positions: agent 0 in the self plane, the rest in others.
fn true_locations(env: &EnvView, ol: &ObsLayout, img: &mut [f32]) {
    for (j, a) in env.agents().iter().enumerate() {
        let (x, y) = a.tile();
        let ch = if j == 0 { ol.ch_self() } else { ol.other_plane(0, j) };
        put(img, ol, ch, x, y, 1.0);
    }
}

/// Most recent record for POI `p` across all beliefs.
fn fused_poi_record(env: &EnvView, p: usize) -> BeliefRecord {
    let k = env.knowledge();
    (0..k.n_beliefs()).map(|b| k.poi_record(b, p)).max_by_key(|r| r.stamp).unwrap_or_default()
}

fn dynamic_centralized(env: &EnvView, ol: &ObsLayout, img: &mut [f32]) {
    for (p, poi) in env.pois().iter().enumerate() {
        let r = fused_poi_record(env, p);
        if r.known() && !poi.saved() {
            put(img, ol, ol.ch_pois(), r.x as usize, r.y as usize, 1.0);
        }
    }
    true_locations(env, ol, img);
}

fn dynamic_true(env: &EnvView, ol: &ObsLayout, img: &mut [f32]) {
    for poi in env.pois().iter().filter(|p| !p.saved()) {
        let (x, y) = poi.tile();
        put(img, ol, ol.ch_pois(), x, y, 1.0);
    }
    true_locations(env, ol, img);
}

fn clear_dynamic(ol: &ObsLayout, img: &mut [f32]) {
    let plane = ol.plane();
    img[ol.ch_pois() * plane..ol.ch_discovery() * plane].fill(0.0);
    img[ol.ch_self() * plane..].fill(0.0);
}

/// Agent `agent`'s partial image and logical vector, from its own belief.
pub fn fill_decentralized(
    env: &EnvView,
    agent: usize,
    ol: &ObsLayout,
    horizon: u32,
    image: &mut [f32],
    logical: &mut [f32],
) -> Result<()> {
    check_len("observation image", image.len(), ol.image_len())?;
    check_len("logical", logical.len(), LOGICAL_LEN)?;
    if env.layout().knowledge_mode != KnowledgeMode::PerAgent {
        return Err(Error::contract("decentralized fill needs per-agent knowledge"));
    }
    image.fill(0.0);
    let k = env.knowledge();
    fill_static(env, ol, image, |i| k.known(agent, i));
    dynamic_decentralized(env, agent, ol, image);
    write_logical(env, agent, horizon, logical);
    Ok(())
}

/// The team's fused partial image: the union of every belief in the env.
pub fn fill_centralized(env: &EnvView, ol: &ObsLayout, image: &mut [f32]) -> Result<()> {
    check_len("observation image", image.len(), ol.image_len())?;
    if env.layout().knowledge_mode == KnowledgeMode::None {
        return Err(Error::contract("centralized fill needs a knowledge block"));
    }
    image.fill(0.0);
    let k = env.knowledge();
    let n = k.n_beliefs();
    if n == 1 {
        fill_static(env, ol, image, |i| k.known(0, i));
    } else {
        fill_static(env, ol, image, |i| (0..n).any(|b| k.known(b, i)));
    }
    dynamic_centralized(env, ol, image);
    Ok(())
}

/// The omniscient image: every tile, true POI and agent positions, and the
/// global observed map as the discovery plane.
pub fn fill_true_state(env: &EnvView, ol: &ObsLayout, image: &mut [f32]) -> Result<()> {
    check_len("state image", image.len(), ol.image_len())?;
    image.fill(0.0);
    let plane = ol.plane();
    let (alt, disc) = (ol.ch_altitude() * plane, ol.ch_discovery() * plane);
    for (i, t) in env.grid().iter().enumerate() {
        image[t.type_id() * plane + i] = 1.0;
        image[alt + i] = t.altitude;
        if t.observed() {
            image[disc + i] = 1.0;
        }
    }
    dynamic_true(env, ol, image);
    Ok(())
}

/// Output slices for one env. `obs` holds `n_obs_images` images back to back,
/// `logical` holds `n_agents * LOGICAL_LEN` floats.
#[derive(Debug, Default)]
pub struct ObsBuffers<'a> {
    pub obs: Option<&'a mut [f32]>,
    pub logical: Option<&'a mut [f32]>,
    pub state: Option<&'a mut [f32]>,
}

fn require<'b>(buf: &'b mut Option<&mut [f32]>, what: &str, mode: ObsMode) -> Result<&'b mut [f32]> {
    buf.as_deref_mut().ok_or_else(|| Error::contract(format!("{mode} mode needs a {what} buffer")))
}

/// Writes whatever `mode` produces for `env`. Void writes nothing.
pub fn emit(env: &EnvView, mode: ObsMode, ol: &ObsLayout, horizon: u32, mut buffers: ObsBuffers) -> Result<()> {
    let n = ol.image_len();
    if mode.is_decentralized() {
        let obs = require(&mut buffers.obs, "observation", mode)?;
        check_len("observation", obs.len(), n * ol.n_agents)?;
        let logical = require(&mut buffers.logical, "logical", mode)?;
        check_len("logical", logical.len(), LOGICAL_LEN * ol.n_agents)?;
        for (a, (img, log)) in obs.chunks_exact_mut(n).zip(logical.chunks_exact_mut(LOGICAL_LEN)).enumerate() {
            fill_decentralized(env, a, ol, horizon, img, log)?;
        }
    } else if mode.n_obs_images(ol.n_agents) == 1 {
        fill_centralized(env, ol, require(&mut buffers.obs, "observation", mode)?)?;
    }
    if mode.has_state() {
        fill_true_state(env, ol, require(&mut buffers.state, "state", mode)?)?;
    }
    Ok(())
}

/// Like [`emit`] but assumes the buffers still hold this env's previous
/// frame: static planes are touched only at tiles that became known this
/// step, dynamic planes are cleared and redrawn.
pub fn emit_diff(
    env: &EnvView,
    mode: ObsMode,
    ol: &ObsLayout,
    horizon: u32,
    scratch: &StepScratch,
    mut buffers: ObsBuffers,
) -> Result<()> {
    let n = ol.image_len();
    if mode.is_decentralized() {
        let obs = require(&mut buffers.obs, "observation", mode)?;
        check_len("observation", obs.len(), n * ol.n_agents)?;
        let logical = require(&mut buffers.logical, "logical", mode)?;
        check_len("logical", logical.len(), LOGICAL_LEN * ol.n_agents)?;
        for (a, (img, log)) in obs.chunks_exact_mut(n).zip(logical.chunks_exact_mut(LOGICAL_LEN)).enumerate() {
            for &i in &scratch.newly_known[a] {
                write_tile(env, ol, img, i as usize);
            }
            clear_dynamic(ol, img);
            dynamic_decentralized(env, a, ol, img);
            write_logical(env, a, horizon, log);
        }
    } else if mode.n_obs_images(ol.n_agents) == 1 {
        let img = require(&mut buffers.obs, "observation", mode)?;
        check_len("observation", img.len(), n)?;
        for &i in &scratch.newly_known[0] {
            write_tile(env, ol, img, i as usize);
        }
        clear_dynamic(ol, img);
        dynamic_centralized(env, ol, img);
    }
    if mode.has_state() {
        let img = require(&mut buffers.state, "state", mode)?;
        check_len("state image", img.len(), n)?;
        let disc = ol.ch_discovery() * ol.plane();
        for &i in &scratch.newly_observed {
            img[disc + i as usize] = 1.0;
        }
        clear_dynamic(ol, img);
        dynamic_true(env, ol, img);
    }
    Ok(())
}
