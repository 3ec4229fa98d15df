//! Throughput measurement: random-action stepping of a pool over a grid of
//! configurations, reported as steps per second mean and standard error.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentAction, DynamicsConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::exec::WaitPolicy;
use crate::map::{AgentDef, Capabilities, MapSpec, PoiDef, Spawn, TileTypeDef, TypeGrid, MapConfig};
use crate::observation::ObsMode;
use crate::rng::EnvRng;
use crate::vecenv::{random_action, Variant, VecConfig, VecEnv};

/// Per-env random action streams, generated straight into the action batch.
#[derive(Debug, Clone)]
pub struct ActionSampler {
    rngs: Vec<EnvRng>,
    n_agents: usize,
}

impl ActionSampler {
    pub fn new(seed: u64, n_envs: usize, n_agents: usize) -> Self {
        // Offset keeps these streams apart from the envs' own.
        let rngs = (0..n_envs).map(|i| EnvRng::for_env(seed ^ 0xac71_0a5e_ed00_0000, i)).collect();
        Self { rngs, n_agents }
    }

    pub fn fill(&mut self, out: &mut [AgentAction]) {
        random_actions(&mut self.rngs, self.n_agents, out);
    }
}

/// Fills `out` (`rngs.len() * n_agents`, env-major) with uniform moves and
/// radio targets; env `i` draws only from `rngs[i]`.
pub fn random_actions(rngs: &mut [EnvRng], n_agents: usize, out: &mut [AgentAction]) {
    debug_assert_eq!(out.len(), rngs.len() * n_agents);
    for (rng, acts) in rngs.iter_mut().zip(out.chunks_exact_mut(n_agents)) {
        for a in acts {
            *a = random_action(rng, n_agents);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub envs: Vec<usize>,
    pub agents: Vec<usize>,
    pub modes: Vec<ObsMode>,
    pub variants: Vec<Variant>,
    pub workers: Vec<usize>,
    pub wait: WaitPolicy,
    /// Env-steps per timed repeat.
    pub steps: u64,
    pub warmup: Duration,
    pub repeats: usize,
    pub seed: u64,
    pub map_size: usize,
    pub n_pois: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            envs: vec![128],
            agents: vec![1],
            modes: vec![ObsMode::Void],
            variants: vec![Variant::Dense],
            workers: vec![0],
            wait: WaitPolicy::default(),
            steps: 1_000_000,
            warmup: Duration::from_secs(5),
            repeats: 6,
            seed: 0,
            map_size: 32,
            n_pois: 2,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.repeats == 0 {
            return usage("repeats must be at least 1".into());
        }
        for list in [&self.envs, &self.agents] {
            if list.is_empty() || list.contains(&0) {
                return usage("envs and agents must be non-empty lists of positive integers".into());
            }
        }
        if self.modes.is_empty() || self.variants.is_empty() || self.workers.is_empty() {
            return usage("modes, variants and workers must be non-empty".into());
        }
        if let Some(&e) = self.envs.iter().find(|&&e| (e as u64) > self.steps) {
            return usage(format!("steps ({}) must be >= envs ({e})", self.steps));
        }
        if let Some(&a) = self.agents.iter().find(|&&a| a > crate::layout::MAX_AGENTS) {
            return usage(format!("{a} agents exceed the maximum of {}", crate::layout::MAX_AGENTS));
        }
        if self.map_size < 2 {
            return usage("map size must be at least 2".into());
        }
        Ok(())
    }
}

/// A square open map with scattered water and rock, `n_agents` all-terrain
/// seekers and `n_pois` stationary hiders, all spawning at random.
pub fn bench_map(size: usize, n_agents: usize, n_pois: usize, seed: u64) -> Result<MapSpec> {
    let mut rng = EnvRng::for_env(seed, usize::MAX);
    let cells = (0..size * size)
        .map(|_| match rng.below(10) {
            0 => 1,
            1 => 2,
            _ => 0,
        })
        .collect();
    let tile = |type_id, rgb, walkable, aquatic, blocking: bool, altitude| TileTypeDef {
        type_id,
        rgb,
        walkable,
        flyable: !blocking,
        aquatic,
        blocking,
        altitude,
        stuck_probability: 0.0,
        dangerous: false,
    };
    let type_table = vec![
        tile(0, [0, 160, 0], true, false, false, 0.0),
        tile(1, [0, 0, 200], false, true, false, 0.0),
        tile(2, [120, 120, 120], false, false, true, 9.0),
    ];
    let agents = (0..n_agents)
        .map(|index| AgentDef {
            index,
            capabilities: Capabilities { walk: true, fly: false, swim: true },
            view_range: 3.0,
            max_alt: f32::INFINITY,
            spawn: Spawn::Random,
            deployment: 0.0,
        })
        .collect();
    let pois = (0..n_pois)
        .map(|index| PoiDef { index, spawn: Spawn::Random, moves: false, savable_by: (1 << n_agents) - 1 })
        .collect();
    let config = MapConfig {
        type_table,
        speeds: vec![1.0; n_agents * 3],
        agents,
        pois,
        horizon: 512,
        rewards: RewardConfig::default(),
        dynamics: DynamicsConfig::default(),
    };
    MapSpec::new(TypeGrid { width: size, height: size, cells }, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub mode: String,
    pub envs: usize,
    pub agents: usize,
    pub workers: usize,
    pub sps_mean: f64,
    pub sps_sem: f64,
    pub wall_s: f64,
}

pub const REPORT_COLUMNS: [&str; 8] =
    ["variant", "mode", "envs", "agents", "workers", "sps_mean", "sps_sem", "wall_s"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Mean and standard error of the mean (sample standard deviation / sqrt n).
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One measured cell.
pub struct Cell {
    pub variant: Variant,
    pub mode: ObsMode,
    pub envs: usize,
    pub agents: usize,
    pub workers: usize,
}

/// Times `repeats` runs of `steps` env-steps for one configuration.
pub fn measure_cell(cell: &Cell, config: &BenchConfig) -> Result<BenchRow> {
    let spec = bench_map(config.map_size, cell.agents, config.n_pois, config.seed)?;
    let vc = VecConfig {
        n_envs: cell.envs,
        n_workers: cell.workers,
        mode: cell.mode,
        seed: config.seed,
        desync: true,
        auto_reset: true,
        wait: config.wait,
        variant: cell.variant,
        merge_others: false,
    };
    let mut pool = VecEnv::new(&spec, vc)?;
    let workers = pool.n_workers();
    pool.vec_reset()?;
    let mut sampler = ActionSampler::new(config.seed, cell.envs, cell.agents);
    let mut actions = vec![AgentAction::default(); cell.envs * cell.agents];

    let start = Instant::now();
    loop {
        sampler.fill(&mut actions);
        pool.vec_step(&actions)?;
        if start.elapsed() >= config.warmup {
            break;
        }
    }

    let iters = config.steps.div_ceil(cell.envs as u64);
    let mut sps = Vec::with_capacity(config.repeats);
    let mut wall = 0.0;
    for _ in 0..config.repeats {
        let t = Instant::now();
        for _ in 0..iters {
            sampler.fill(&mut actions);
            pool.vec_step(&actions)?;
        }
        let s = t.elapsed().as_secs_f64();
        wall += s;
        sps.push((iters * cell.envs as u64) as f64 / s);
    }
    pool.close();
    let (sps_mean, sps_sem) = mean_sem(&sps);
    Ok(BenchRow {
        variant: cell.variant.name().into(),
        mode: cell.mode.name().into(),
        envs: cell.envs,
        agents: cell.agents,
        workers,
        sps_mean,
        sps_sem,
        wall_s: wall,
    })
}

/// Measures every (variant, mode, envs, agents, workers) combination in order.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    run_benchmark_with(config, |_| {})
}

/// As [`run_benchmark`], calling `progress` after each row.
pub fn run_benchmark_with(config: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<BenchReport> {
    config.validate()?;
    let mut rows = Vec::new();
    for &variant in &config.variants {
        for &mode in &config.modes {
            for &envs in &config.envs {
                for &agents in &config.agents {
                    for &workers in &config.workers {
                        let row = measure_cell(&Cell { variant, mode, envs, agents, workers }, config)?;
                        progress(&row);
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(BenchReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown format {other:?} (expected csv or markdown)")),
        }
    }
}

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
            for row in &report.rows {
                w.serialize(row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        ReportFormat::Markdown => {
            let mut out = format!("| {} |\n|{}\n", REPORT_COLUMNS.join(" | "), "---|".repeat(REPORT_COLUMNS.len()));
            for r in &report.rows {
                out += &format!(
                    "| {} | {} | {} | {} | {} | {:.1} | {:.1} | {:.3} |\n",
                    r.variant, r.mode, r.envs, r.agents, r.workers, r.sps_mean, r.sps_sem, r.wall_s
                );
            }
            Ok(out.into_bytes())
        }
    }
}

pub fn parse_csv_report(bytes: &[u8]) -> Result<BenchReport> {
    let mut r = csv::Reader::from_reader(bytes);
    let rows = r.deserialize().collect::<Result<Vec<BenchRow>, _>>().map_err(csv_err)?;
    Ok(BenchReport { rows })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
