#![allow(dead_code)]

pub mod reference;

use std::path::PathBuf;

use seekworld::dynamics::{DynamicsConfig, RewardConfig};
use seekworld::map::{AgentDef, Capabilities, MapConfig, PoiDef, Spawn, TileTypeDef, TypeGrid};
use seekworld::{AgentAction, EnvRng, MapSpec};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Loads `<name>.png` + `<name>.json` from the fixtures directory.
pub fn fixture(name: &str) -> MapSpec {
    MapSpec::load(fixture_path(&format!("{name}.png")), fixture_path(&format!("{name}.json")))
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn tile_type(type_id: u8, rgb: [u8; 3]) -> TileTypeDef {
    TileTypeDef {
        type_id,
        rgb,
        walkable: true,
        flyable: true,
        aquatic: false,
        blocking: false,
        altitude: 0.0,
        stuck_probability: 0.0,
        dangerous: false,
    }
}

pub fn wall_type(type_id: u8, rgb: [u8; 3], altitude: f32) -> TileTypeDef {
    TileTypeDef { walkable: false, flyable: false, blocking: true, altitude, ..tile_type(type_id, rgb) }
}

pub fn walker(index: usize, x: u16, y: u16, view_range: f32) -> AgentDef {
    AgentDef {
        index,
        capabilities: Capabilities { walk: true, fly: false, swim: false },
        view_range,
        max_alt: f32::INFINITY,
        spawn: Spawn::At { x, y },
        deployment: 0.0,
    }
}

pub fn poi_at(index: usize, x: u16, y: u16, savable_by: u32) -> PoiDef {
    PoiDef { index, spawn: Spawn::At { x, y }, moves: false, savable_by }
}

/// Map drawn from ASCII rows: `.` is type 0 and every other byte indexes
/// `extra` (type id = position in `extra` + 1).
pub fn ascii_map(
    rows: &[&str],
    extra: &[(u8, TileTypeDef)],
    agents: Vec<AgentDef>,
    pois: Vec<PoiDef>,
    speeds: Option<Vec<f32>>,
) -> MapSpec {
    let mut table = vec![tile_type(0, [0, 160, 0])];
    table.extend(extra.iter().map(|(_, t)| t.clone()));
    let cells = rows
        .iter()
        .flat_map(|r| r.bytes())
        .map(|b| if b == b'.' { 0 } else { extra.iter().position(|(c, _)| *c == b).expect("known glyph") as u8 + 1 })
        .collect();
    let n_types = table.len();
    let n_agents = agents.len();
    let config = MapConfig {
        type_table: table,
        speeds: speeds.unwrap_or_else(|| vec![1.0; n_agents * n_types]),
        agents,
        pois,
        horizon: 512,
        rewards: RewardConfig::default(),
        dynamics: DynamicsConfig::default(),
    };
    MapSpec::new(TypeGrid { width: rows[0].len(), height: rows.len(), cells }, config).expect("valid test map")
}

/// Independent random action stream used to drive pools in tests.
pub fn random_batch(rng: &mut EnvRng, n_envs: usize, n_agents: usize) -> Vec<AgentAction> {
    (0..n_envs * n_agents)
        .map(|_| {
            let ax = rng.next_f32() * 2.0 - 1.0;
            let ay = rng.next_f32() * 2.0 - 1.0;
            AgentAction::new(ax, ay, rng.below(n_agents) as u32)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleStats {
    pub env_steps: u64,
    pub terminated: u64,
    pub truncated: u64,
    pub found: u64,
    pub saved: u64,
    pub got_stuck: u64,
}

/// Drives a pool and one reference env per slot with the same actions and
/// compares full state, rewards, done flags and random-stream positions after
/// every step, and observation buffers every `obs_every` steps.
pub fn oracle_run(
    spec: &MapSpec,
    mode: seekworld::ObsMode,
    seed: u64,
    n_envs: usize,
    steps: usize,
    obs_every: usize,
) -> Result<OracleStats, String> {
    use reference::{RefEnv, State};
    use seekworld::{VecConfig, VecEnv};

    let knowledge = mode.knowledge();
    let config = VecConfig { n_envs, n_workers: 2, mode, seed, ..Default::default() };
    let mut pool = VecEnv::new(spec, config).map_err(|e| e.to_string())?;
    pool.vec_reset().map_err(|e| e.to_string())?;
    let mut rngs: Vec<EnvRng> = (0..n_envs).map(|i| EnvRng::for_env(seed, i)).collect();
    let mut refs: Vec<RefEnv> =
        rngs.iter_mut().map(|r| RefEnv::pool_reset(spec, knowledge, true, r)).collect();
    let ol = *pool.obs_layout();
    let n = spec.n_agents();

    let check_obs = |pool: &VecEnv, refs: &[RefEnv], t: usize| -> Result<(), String> {
        for (i, r) in refs.iter().enumerate() {
            let (obs, logical, state) = r.expected_outputs(mode, &ol);
            let sections = [("obs", pool.observations(), obs), ("logical", pool.logical(), logical), ("state", pool.state(), state)];
            for (what, got, want) in sections {
                let per = want.len();
                let got = &got[i * per..(i + 1) * per];
                if let Some(k) = (0..per).find(|&k| got[k].to_bits() != want[k].to_bits()) {
                    return Err(format!("step {t} env {i}: {what}[{k}] = {} but reference has {}", got[k], want[k]));
                }
            }
        }
        Ok(())
    };
    let check_state = |pool: &VecEnv, refs: &[RefEnv], rngs: &[EnvRng], t: usize| -> Result<(), String> {
        for (i, r) in refs.iter().enumerate() {
            let got = State::from_engine(&pool.env(i).map_err(|e| e.to_string())?, spec);
            if got != r.state {
                return Err(format!("step {t} env {i}: state diverged\nengine: {got:?}\nreference: {:?}", r.state));
            }
            if pool.env_rng(i) != rngs[i] {
                return Err(format!("step {t} env {i}: random stream position diverged"));
            }
        }
        Ok(())
    };

    check_state(&pool, &refs, &rngs, 0)?;
    check_obs(&pool, &refs, 0)?;
    let mut stats = OracleStats::default();
    let mut driver = EnvRng::new(seed ^ 0xD1CE);
    for t in 1..=steps {
        let actions = random_batch(&mut driver, n_envs, n);
        pool.vec_step(&actions).map_err(|e| e.to_string())?;
        for i in 0..n_envs {
            let o = refs[i].step(&actions[i * n..(i + 1) * n], &mut rngs[i]);
            let want_rewards: Vec<f32> =
                if spec.dynamics.per_agent_rewards { refs[i].agent_rewards.clone() } else { vec![o.reward] };
            let per = want_rewards.len();
            let got = &pool.rewards()[i * per..(i + 1) * per];
            if got.iter().zip(&want_rewards).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return Err(format!("step {t} env {i}: reward {got:?} but reference has {want_rewards:?}"));
            }
            let flags = (pool.terminated()[i] != 0, pool.truncated()[i] != 0);
            if flags != (o.terminated, o.truncated) {
                return Err(format!("step {t} env {i}: done flags {flags:?} but reference has {:?}", (o.terminated, o.truncated)));
            }
            stats.env_steps += 1;
            stats.terminated += o.terminated as u64;
            stats.truncated += o.truncated as u64;
            stats.found += o.found as u64;
            stats.saved += o.saved as u64;
            stats.got_stuck += o.got_stuck as u64;
            if o.terminated || o.truncated {
                refs[i] = RefEnv::reset(spec, knowledge, &mut rngs[i]);
            }
        }
        check_state(&pool, &refs, &rngs, t)?;
        if t % obs_every == 0 {
            check_obs(&pool, &refs, t)?;
        }
    }
    Ok(stats)
}

/// One env in its own arena, stepped directly.
pub struct Harness {
    pub spec: MapSpec,
    pub arena: seekworld::EnvironmentArena,
    pub template: seekworld::EnvTemplate,
    pub rng: EnvRng,
    pub scratch: seekworld::StepScratch,
}

impl Harness {
    pub fn new(spec: MapSpec, knowledge: seekworld::KnowledgeMode, seed: u64) -> Self {
        let (mut arena, template) = seekworld::allocate_arena(&spec, 1, knowledge).unwrap();
        let mut rng = EnvRng::new(seed);
        arena.reset_env(&template, 0, &mut rng);
        let scratch = seekworld::StepScratch::new(template.rules());
        Self { spec, arena, template, rng, scratch }
    }

    pub fn view(&self) -> seekworld::EnvView<'_> {
        self.arena.env(0)
    }

    pub fn step(&mut self, actions: &[AgentAction]) -> seekworld::Result<seekworld::StepResult> {
        seekworld::step_env(
            &mut self.arena.env_mut(0).parts(),
            self.template.rules(),
            actions,
            &mut self.rng,
            &mut self.scratch,
        )
    }

    pub fn moves(&mut self, moves: &[(f32, f32)]) -> seekworld::StepResult {
        let actions: Vec<_> =
            moves.iter().enumerate().map(|(a, &(x, y))| AgentAction::new(x, y, a as u32)).collect();
        self.step(&actions).unwrap()
    }

    pub fn place_agent(&mut self, a: usize, x: f32, y: f32) {
        let mut env = self.arena.env_mut(0);
        let s = &mut env.parts().agents[a];
        s.x = x;
        s.y = y;
        s.last_x = x as u16;
        s.last_y = y as u16;
    }

    pub fn agent_pos(&self, a: usize) -> (f32, f32) {
        let s = self.view().agents()[a];
        (s.x, s.y)
    }
}
