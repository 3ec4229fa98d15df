//! Tabular Q-learning on a tiny single-agent map, as a check that the reward
//! signal can be learned at all.

use serde::Serialize;

use crate::bench::mean_sem;
use crate::dynamics::{AgentAction, DynamicsConfig, RewardConfig};
use crate::error::Result;
use crate::map::{AgentDef, Capabilities, MapConfig, MapSpec, PoiDef, Spawn, TileTypeDef, TypeGrid};
use crate::observation::ObsMode;
use crate::rng::EnvRng;
use crate::vecenv::{VecConfig, VecEnv};

pub const N_ACTIONS: usize = 9;

/// Compass moves plus stay, as unit-component move vectors.
pub const MOVES: [(f32, f32); N_ACTIONS] = [
    (0.0, 0.0),
    (0.0, -1.0),
    (1.0, -1.0),
    (1.0, 0.0),
    (1.0, 1.0),
    (0.0, 1.0),
    (-1.0, 1.0),
    (-1.0, 0.0),
    (-1.0, -1.0),
];

pub fn action(index: usize) -> AgentAction {
    let (ax, ay) = MOVES[index];
    AgentAction { ax, ay, radio_target: 0 }
}

const SMOKE_LAYOUT: [&str; 8] = [
    "........",
    "..##....",
    "..#..#..",
    ".....#..",
    "##...#..",
    "....##..",
    "..#.....",
    "..#.....",
];

/// 8x8 map: one walker at (0,0), one stationary POI at (7,6), a few walls.
pub fn smoke_map() -> MapSpec {
    let cells = SMOKE_LAYOUT.iter().flat_map(|row| row.bytes().map(|b| (b == b'#') as u8)).collect();
    let tile = |type_id, rgb, blocking: bool| TileTypeDef {
        type_id,
        rgb,
        walkable: !blocking,
        flyable: false,
        aquatic: false,
        blocking,
        altitude: if blocking { 5.0 } else { 0.0 },
        stuck_probability: 0.0,
        dangerous: false,
    };
    let config = MapConfig {
        type_table: vec![tile(0, [0, 160, 0], false), tile(1, [90, 90, 90], true)],
        speeds: vec![1.0, 0.0],
        agents: vec![AgentDef {
            index: 0,
            capabilities: Capabilities { walk: true, fly: false, swim: false },
            view_range: 1.5,
            max_alt: f32::INFINITY,
            spawn: Spawn::At { x: 0, y: 0 },
            deployment: 0.0,
        }],
        pois: vec![PoiDef { index: 0, spawn: Spawn::At { x: 7, y: 6 }, moves: false, savable_by: 1 }],
        horizon: 64,
        rewards: RewardConfig::default(),
        dynamics: DynamicsConfig::default(),
    };
    MapSpec::new(TypeGrid { width: 8, height: 8, cells }, config).expect("smoke map is valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmokeConfig {
    pub steps: u64,
    pub gamma: f32,
    pub alpha: f32,
    pub epsilon_start: f32,
    pub epsilon_end: f32,
    /// Fraction of `steps` over which epsilon decays linearly.
    pub epsilon_decay: f32,
    pub eval_interval: u64,
    pub eval_episodes: usize,
}

impl Default for SmokeConfig {
    fn default() -> Self {
        Self {
            steps: 200_000,
            gamma: 0.99,
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.5,
            eval_interval: 20_000,
            eval_episodes: 32,
        }
    }
}

/// Q-values indexed by `(tile, poi found)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_tiles: usize,
    values: Vec<[f32; N_ACTIONS]>,
}

impl QTable {
    pub fn new(n_tiles: usize) -> Self {
        Self { n_tiles, values: vec![[0.0; N_ACTIONS]; n_tiles * 2] }
    }

    pub fn n_states(&self) -> usize {
        self.n_tiles * 2
    }

    pub fn row(&self, s: usize) -> &[f32; N_ACTIONS] {
        &self.values[s]
    }

    /// Highest-valued action; ties broken uniformly.
    pub fn greedy(&self, s: usize, rng: &mut EnvRng) -> usize {
        let row = &self.values[s];
        let best = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let ties = row.iter().filter(|&&v| v == best).count();
        let mut pick = rng.below(ties);
        for (a, &v) in row.iter().enumerate() {
            if v == best {
                if pick == 0 {
                    return a;
                }
                pick -= 1;
            }
        }
        unreachable!("at least one action attains the maximum")
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Random,
    Stay,
    Greedy(&'a QTable),
}

impl Policy<'_> {
    fn pick(&self, s: usize, rng: &mut EnvRng) -> usize {
        match self {
            Policy::Random => rng.below(N_ACTIONS),
            Policy::Stay => 0,
            Policy::Greedy(q) => q.greedy(s, rng),
        }
    }
}

fn make_pool(spec: &MapSpec, seed: u64) -> Result<VecEnv> {
    let config = VecConfig {
        n_envs: 1,
        n_workers: 1,
        mode: ObsMode::Void,
        seed,
        desync: false,
        auto_reset: true,
        ..Default::default()
    };
    let mut pool = VecEnv::new(spec, config)?;
    pool.vec_reset()?;
    Ok(pool)
}

fn state_key(pool: &VecEnv) -> Result<usize> {
    let env = pool.env(0)?;
    let (x, y) = env.agents()[0].tile();
    let found = env.pois()[0].found() as usize;
    Ok((y * env.layout().width + x) * 2 + found)
}

/// Mean episodic return of `policy` over `n_episodes` fresh episodes, with its
/// standard error.
pub fn evaluate_policy(spec: &MapSpec, policy: Policy, n_episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let mut pool = make_pool(spec, seed)?;
    let mut rng = EnvRng::for_env(seed, 1);
    let mut returns = Vec::with_capacity(n_episodes);
    let mut total = 0.0f64;
    while returns.len() < n_episodes {
        let s = state_key(&pool)?;
        pool.vec_step(&[action(policy.pick(s, &mut rng))])?;
        total += pool.rewards()[0] as f64;
        if pool.terminated()[0] != 0 || pool.truncated()[0] != 0 {
            returns.push(total);
            total = 0.0;
        }
    }
    Ok(mean_sem(&returns))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean_return: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmokeOutcome {
    pub curve: Vec<CurvePoint>,
    pub q: QTable,
}

/// Trains with epsilon-greedy Q-learning for `config.steps` env steps,
/// evaluating the greedy policy every `eval_interval` steps.
pub fn train_q_smoke(spec: &MapSpec, config: &SmokeConfig, seed: u64) -> Result<SmokeOutcome> {
    let mut pool = make_pool(spec, seed)?;
    let mut rng = EnvRng::for_env(seed, 2);
    let mut q = QTable::new(spec.width * spec.height);
    let mut curve = Vec::new();
    let decay_steps = (config.steps as f32 * config.epsilon_decay).max(1.0);
    let mut s = state_key(&pool)?;
    for t in 0..config.steps {
        let frac = (t as f32 / decay_steps).min(1.0);
        let eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
        let a = if rng.next_f32() < eps { rng.below(N_ACTIONS) } else { q.greedy(s, &mut rng) };
        pool.vec_step(&[action(a)])?;
        let r = pool.rewards()[0];
        let done = pool.terminated()[0] != 0 || pool.truncated()[0] != 0;
        let next = state_key(&pool)?;
        let target = if done {
            r
        } else {
            r + config.gamma * q.values[next].iter().copied().fold(f32::NEG_INFINITY, f32::max)
        };
        let v = &mut q.values[s][a];
        *v += config.alpha * (target - *v);
        s = next;

        if (t + 1) % config.eval_interval == 0 || t + 1 == config.steps {
            let (mean_return, sem) =
                evaluate_policy(spec, Policy::Greedy(&q), config.eval_episodes, seed ^ (t + 1))?;
            curve.push(CurvePoint { step: t + 1, mean_return, sem });
        }
    }
    Ok(SmokeOutcome { curve, q })
}

pub fn curve_csv(curve: &[CurvePoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in curve {
        w.serialize(p).map_err(|e| crate::error::Error::Format(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))
}
