//! Batched stepping of many environments over a worker pool.
//!
//! All outputs live in one aligned allocation described by
//! [`BufferDescriptor`]s. Observations are written in place by the worker that
//! steps the env; rewards and done flags go to per-worker scratch first and
//! are copied into the shared arrays by a single serial pass.

use std::mem::MaybeUninit;

use crate::arena::{EnvTemplate, EnvironmentArena};
use crate::dynamics::{step_env, AgentAction, StepResult, StepScratch};
use crate::env::{EnvView, EnvViewMut, COUNTER_POIS_FOUND, COUNTER_POIS_SAVED, COUNTER_TILES_DISCOVERED};
use crate::error::{Error, Result};
use crate::exec::{CacheAligned, Executor, SharedChunks, WaitPolicy, WorkerLocal, CACHE_BLOCK};
use crate::layout::{round_up, StridePadding, STRIDE_ALIGN};
use crate::map::MapSpec;
use crate::observation::{emit, emit_diff, ObsBuffers, ObsLayout, ObsMode, LOGICAL_LEN};
use crate::rng::EnvRng;
use crate::slab::{AlignedBuf, InitPolicy};

/// Version of the output buffer contract.
pub const ABI_VERSION: &str = "seekworld-abi/1";

/// Structural variants compared by the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Full observation rebuild each step, padded strides, scratch-then-copy.
    #[default]
    Dense,
    /// Observation planes patched only where knowledge changed.
    DiffSweep,
    /// Env regions packed back to back and rewards written straight into the
    /// shared arrays from every worker.
    UnpaddedStride,
    /// Arena and outputs zero-filled by the calling thread.
    SerialInit,
    /// Outputs round-tripped through boxed per-env tuples every step.
    TuplePack,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Dense, Variant::DiffSweep, Variant::UnpaddedStride, Variant::SerialInit, Variant::TuplePack];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Dense => "dense",
            Variant::DiffSweep => "diff_sweep",
            Variant::UnpaddedStride => "unpadded_stride",
            Variant::SerialInit => "serial_init",
            Variant::TuplePack => "tuple_pack",
        }
    }

    pub fn padding(&self) -> StridePadding {
        match self {
            Variant::UnpaddedStride => StridePadding::Unpadded,
            _ => StridePadding::Aligned,
        }
    }

    pub fn init(&self) -> InitPolicy {
        match self {
            Variant::SerialInit => InitPolicy::Serial,
            _ => InitPolicy::FirstTouch,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Variant::ALL.into_iter().find(|v| v.name() == norm).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            format!("unknown variant {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VecConfig {
    pub n_envs: usize,
    /// 0 selects the hardware default.
    pub n_workers: usize,
    pub mode: ObsMode,
    pub seed: u64,
    /// Advance each env a random number of steps during `vec_reset`.
    pub desync: bool,
    pub auto_reset: bool,
    pub wait: WaitPolicy,
    pub variant: Variant,
    /// One undifferentiated other-agents plane instead of one per teammate.
    pub merge_others: bool,
}

impl Default for VecConfig {
    fn default() -> Self {
        Self {
            n_envs: 1,
            n_workers: 0,
            mode: ObsMode::default(),
            seed: 0,
            desync: true,
            auto_reset: true,
            wait: WaitPolicy::default(),
            variant: Variant::default(),
            merge_others: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BufferRole {
    ObsImage,
    ObsLogical,
    StateImage,
    Rewards,
    Terminated,
    Truncated,
}

impl BufferRole {
    pub fn name(&self) -> &'static str {
        match self {
            BufferRole::ObsImage => "obs_image",
            BufferRole::ObsLogical => "obs_logical",
            BufferRole::StateImage => "state_image",
            BufferRole::Rewards => "rewards",
            BufferRole::Terminated => "terminated",
            BufferRole::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    U8,
}

impl DType {
    pub fn size(&self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

/// Where one output array lives inside the output allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferDescriptor {
    pub role: BufferRole,
    pub dtype: DType,
    /// C-order shape; the leading axis is always the env index.
    pub shape: Vec<usize>,
    /// Byte offset from the start of the allocation.
    pub offset: usize,
    pub len_bytes: usize,
}

impl BufferDescriptor {
    pub fn n_elements(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn bytes(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len_bytes
    }

    /// Bytes one env owns in this array.
    pub fn per_env_bytes(&self) -> usize {
        self.len_bytes / self.shape[0]
    }
}

/// All output arrays of a pool, each starting on a `STRIDE_ALIGN` boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputLayout {
    pub descriptors: Vec<BufferDescriptor>,
    pub total_bytes: usize,
}

impl OutputLayout {
    pub fn new(config: &VecConfig, obs: &ObsLayout, per_agent_rewards: bool) -> Self {
        let n = config.n_envs;
        let mode = config.mode;
        let mut shapes: Vec<(BufferRole, DType, Vec<usize>)> = Vec::new();
        let img = obs.shape().to_vec();
        if mode.is_decentralized() {
            shapes.push((BufferRole::ObsImage, DType::F32, [vec![n, obs.n_agents], img.clone()].concat()));
            shapes.push((BufferRole::ObsLogical, DType::F32, vec![n, obs.n_agents, LOGICAL_LEN]));
        } else if mode.n_obs_images(obs.n_agents) == 1 {
            shapes.push((BufferRole::ObsImage, DType::F32, [vec![n], img.clone()].concat()));
        }
        if mode.has_state() {
            shapes.push((BufferRole::StateImage, DType::F32, [vec![n], img].concat()));
        }
        let rewards = if per_agent_rewards { vec![n, obs.n_agents] } else { vec![n] };
        shapes.push((BufferRole::Rewards, DType::F32, rewards));
        shapes.push((BufferRole::Terminated, DType::U8, vec![n]));
        shapes.push((BufferRole::Truncated, DType::U8, vec![n]));

        let mut offset = 0;
        let descriptors = shapes
            .into_iter()
            .map(|(role, dtype, shape)| {
                let len_bytes = shape.iter().product::<usize>() * dtype.size();
                let d = BufferDescriptor { role, dtype, shape, offset, len_bytes };
                offset = round_up(offset + len_bytes, STRIDE_ALIGN);
                d
            })
            .collect();
        Self { descriptors, total_bytes: offset.max(STRIDE_ALIGN) }
    }

    pub fn get(&self, role: BufferRole) -> Option<&BufferDescriptor> {
        self.descriptors.iter().find(|d| d.role == role)
    }

    /// Smallest number of consecutive envs whose slice of every observation
    /// array ends on a cache-block boundary. Work items of this many envs never
    /// share a cache block of an array written during the parallel phase.
    pub fn env_group(&self) -> usize {
        self.descriptors
            .iter()
            .filter(|d| matches!(d.role, BufferRole::ObsImage | BufferRole::ObsLogical | BufferRole::StateImage))
            .map(|d| {
                let b = d.per_env_bytes();
                CACHE_BLOCK / gcd(b, CACHE_BLOCK)
            })
            .max()
            .unwrap_or(1)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

enum OutputStorage {
    Owned(AlignedBuf),
    /// Caller-owned memory registered through `register_output_buffer`.
    External { ptr: *mut u8 },
    Released,
}

impl OutputStorage {
    fn ptr(&self) -> *mut u8 {
        match self {
            OutputStorage::Owned(b) => b.as_ptr() as *mut u8,
            OutputStorage::External { ptr, .. } => *ptr,
            OutputStorage::Released => std::ptr::null_mut(),
        }
    }
}

// SAFETY: an External pointer is only dereferenced by the pool, and the
// registration contract requires the caller to keep the memory alive and
// unaliased while registered.
unsafe impl Send for OutputStorage {}
unsafe impl Sync for OutputStorage {}

/// Raw per-env views into the output arrays, handed to workers.
#[derive(Clone, Copy)]
struct OutPtrs {
    obs: *mut f32,
    obs_len: usize,
    logical: *mut f32,
    logical_len: usize,
    state: *mut f32,
    state_len: usize,
    rewards: *mut f32,
    rewards_len: usize,
    terminated: *mut u8,
    truncated: *mut u8,
}

unsafe impl Send for OutPtrs {}
unsafe impl Sync for OutPtrs {}

impl OutPtrs {
    fn new(base: *mut u8, layout: &OutputLayout) -> Self {
        let sect = |role| match layout.get(role) {
            Some(d) => (unsafe { base.add(d.offset) }, d.per_env_bytes()),
            None => (std::ptr::null_mut(), 0),
        };
        let (obs, ob) = sect(BufferRole::ObsImage);
        let (logical, lb) = sect(BufferRole::ObsLogical);
        let (state, sb) = sect(BufferRole::StateImage);
        let (rewards, rb) = sect(BufferRole::Rewards);
        let (terminated, _) = sect(BufferRole::Terminated);
        let (truncated, _) = sect(BufferRole::Truncated);
        Self {
            obs: obs.cast(),
            obs_len: ob / 4,
            logical: logical.cast(),
            logical_len: lb / 4,
            state: state.cast(),
            state_len: sb / 4,
            rewards: rewards.cast(),
            rewards_len: rb / 4,
            terminated,
            truncated,
        }
    }

    /// # Safety
    /// Env `i` must be in range and not concurrently accessed elsewhere.
    unsafe fn obs_buffers<'a>(&self, i: usize) -> ObsBuffers<'a> {
        let slice = |p: *mut f32, n: usize| {
            if p.is_null() {
                None
            } else {
                Some(std::slice::from_raw_parts_mut(p.add(i * n), n))
            }
        };
        ObsBuffers {
            obs: slice(self.obs, self.obs_len),
            logical: slice(self.logical, self.logical_len),
            state: slice(self.state, self.state_len),
        }
    }

    /// # Safety
    /// As for `obs_buffers`.
    unsafe fn write_result(&self, i: usize, rewards: &[f32], r: StepResult) {
        std::slice::from_raw_parts_mut(self.rewards.add(i * self.rewards_len), self.rewards_len)
            .copy_from_slice(rewards);
        *self.terminated.add(i) = r.terminated as u8;
        *self.truncated.add(i) = r.truncated as u8;
    }
}

struct Finished {
    env: u32,
    result: StepResult,
}

struct WorkerScratch {
    step: StepScratch,
    finished: Vec<Finished>,
    /// Reward values for `finished`, `rewards_len` per entry.
    rewards: Vec<f32>,
    reward_tmp: Vec<f32>,
    error: Option<Error>,
}

/// A pool of environments stepped together.
pub struct VecEnv {
    config: VecConfig,
    template: EnvTemplate,
    obs_layout: ObsLayout,
    out_layout: OutputLayout,
    group: usize,
    exec: Option<Executor>,
    arena: Option<EnvironmentArena>,
    rngs: Vec<CacheAligned<EnvRng>>,
    scratch: WorkerLocal<WorkerScratch>,
    outputs: OutputStorage,
}

impl std::fmt::Debug for VecEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VecEnv")
            .field("config", &self.config)
            .field("group", &self.group)
            .field("closed", &self.is_closed())
            .finish()
    }
}

impl VecEnv {
    pub fn new(spec: &MapSpec, config: VecConfig) -> Result<Self> {
        if config.n_envs == 0 {
            return Err(Error::validation("n_envs must be at least 1"));
        }
        let template = EnvTemplate::new(spec, config.mode.knowledge(), config.variant.padding())?;
        let exec = Executor::new(config.n_workers, config.wait)?;
        let init = config.variant.init();
        let arena = EnvironmentArena::allocate(template.layout(), config.n_envs, &exec, init)?;
        let obs_layout =
            ObsLayout::new(spec.width, spec.height, spec.n_types(), spec.n_agents(), config.merge_others);
        let per_agent = spec.dynamics.per_agent_rewards;
        let out_layout = OutputLayout::new(&config, &obs_layout, per_agent);
        let group = if config.variant == Variant::UnpaddedStride { 1 } else { out_layout.env_group() };
        let outputs = AlignedBuf::zeroed(64 * 1024, out_layout.total_bytes.div_ceil(64 * 1024), STRIDE_ALIGN, &exec, init)?;
        let rngs = (0..config.n_envs).map(|i| CacheAligned(EnvRng::for_env(config.seed, i))).collect();
        let rewards_len = if per_agent { spec.n_agents() } else { 1 };
        let rules = template.rules().clone();
        let scratch = WorkerLocal::new(exec.n_workers(), |_| WorkerScratch {
            step: StepScratch::new(&rules),
            finished: Vec::with_capacity(config.n_envs),
            rewards: Vec::with_capacity(config.n_envs * rewards_len),
            reward_tmp: vec![0.0; rewards_len],
            error: None,
        });
        Ok(Self {
            config,
            template,
            obs_layout,
            out_layout,
            group,
            exec: Some(exec),
            arena: Some(arena),
            rngs,
            scratch,
            outputs: OutputStorage::Owned(outputs),
        })
    }

    pub fn config(&self) -> &VecConfig {
        &self.config
    }
    pub fn n_envs(&self) -> usize {
        self.config.n_envs
    }
    pub fn n_agents(&self) -> usize {
        self.obs_layout.n_agents
    }
    pub fn n_workers(&self) -> usize {
        self.exec.as_ref().map_or(0, Executor::n_workers)
    }
    pub fn template(&self) -> &EnvTemplate {
        &self.template
    }
    pub fn obs_layout(&self) -> &ObsLayout {
        &self.obs_layout
    }
    pub fn output_layout(&self) -> &OutputLayout {
        &self.out_layout
    }
    pub fn descriptors(&self) -> &[BufferDescriptor] {
        &self.out_layout.descriptors
    }
    pub fn is_closed(&self) -> bool {
        self.exec.is_none()
    }

    fn live(&self) -> Result<()> {
        if self.is_closed() {
            Err(Error::contract("pool is closed"))
        } else {
            Ok(())
        }
    }

    pub fn arena(&self) -> Result<&EnvironmentArena> {
        self.live()?;
        Ok(self.arena.as_ref().expect("open pool has an arena"))
    }

    /// Read-only view of env `i`'s state.
    pub fn env(&self, i: usize) -> Result<EnvView<'_>> {
        let arena = self.arena()?;
        if i >= arena.n_envs() {
            return Err(Error::contract(format!("env {i} out of range")));
        }
        Ok(arena.env(i))
    }

    /// Current state of env `i`'s random stream.
    pub fn env_rng(&self, i: usize) -> EnvRng {
        *self.rngs[i]
    }

    /// Base address of the output allocation. Constant for the pool's life
    /// unless a new buffer is registered.
    pub fn output_ptr(&self) -> *const u8 {
        self.outputs.ptr()
    }

    /// The whole output allocation.
    pub fn output_bytes(&self) -> Result<&[u8]> {
        self.live()?;
        // SAFETY: open pools own or borrow `total_bytes` initialized bytes.
        Ok(unsafe { std::slice::from_raw_parts(self.outputs.ptr(), self.out_layout.total_bytes) })
    }

    fn section<T: bytemuck::Pod>(&self, role: BufferRole) -> &[T] {
        match (self.output_bytes(), self.out_layout.get(role)) {
            (Ok(bytes), Some(d)) => bytemuck::cast_slice(&bytes[d.bytes()]),
            _ => &[],
        }
    }

    pub fn rewards(&self) -> &[f32] {
        self.section(BufferRole::Rewards)
    }
    pub fn terminated(&self) -> &[u8] {
        self.section(BufferRole::Terminated)
    }
    pub fn truncated(&self) -> &[u8] {
        self.section(BufferRole::Truncated)
    }
    /// Partial images; empty for modes without them.
    pub fn observations(&self) -> &[f32] {
        self.section(BufferRole::ObsImage)
    }
    pub fn logical(&self) -> &[f32] {
        self.section(BufferRole::ObsLogical)
    }
    pub fn state(&self) -> &[f32] {
        self.section(BufferRole::StateImage)
    }

    /// Moves all outputs into caller-owned memory. The engine zero-fills it
    /// across its workers, copies the current outputs over, and from then on
    /// writes only there.
    ///
    /// # Safety
    /// `ptr` must be valid for reads and writes of `len` bytes until the pool
    /// is closed, dropped, or another buffer is registered, and must not be
    /// accessed by anything else while a pool method runs.
    pub unsafe fn register_output_buffer(&mut self, ptr: *mut u8, len: usize) -> Result<()> {
        self.live()?;
        if ptr.is_null() || (ptr as usize) % STRIDE_ALIGN != 0 {
            return Err(Error::contract(format!("output buffer must be {STRIDE_ALIGN}-byte aligned")));
        }
        let need = self.out_layout.total_bytes;
        if len < need {
            return Err(Error::contract(format!("output buffer has {len} bytes, needs {need}")));
        }
        let exec = self.exec.as_ref().expect("open pool");
        let chunks = SharedChunks::from_raw(ptr.cast::<MaybeUninit<u8>>(), need, 64 * 1024);
        exec.for_each_dynamic(chunks.len(), |_, i| chunks.chunk_mut(i).fill(MaybeUninit::new(0)));
        std::ptr::copy_nonoverlapping(self.outputs.ptr(), ptr, need);
        self.outputs = OutputStorage::External { ptr };
        Ok(())
    }

    fn out_ptrs(&self) -> OutPtrs {
        OutPtrs::new(self.outputs.ptr(), &self.out_layout)
    }

    /// Resets every env, optionally advancing each a random number of steps
    /// with random actions, then writes fresh observations. Rewards and done
    /// flags are zeroed.
    pub fn vec_reset(&mut self) -> Result<()> {
        self.live()?;
        let ptrs = self.out_ptrs();
        let desync = self.config.desync;
        let mode = self.config.mode;
        let horizon = self.template.rules().horizon;
        let n_agents = self.n_agents();
        let n_envs = self.n_envs();
        let group = self.group;
        let template = &self.template;
        let ol = &self.obs_layout;
        let exec = self.exec.as_ref().expect("open pool");
        let arena = self.arena.as_mut().expect("open pool");
        let layout = *arena.layout();
        let regions = arena.regions();
        let rngs = SharedChunks::new(&mut self.rngs, 1);
        let scratch = &self.scratch;
        let actions_buf = WorkerLocal::new(exec.n_workers(), |_| vec![AgentAction::default(); n_agents]);

        exec.for_each_dynamic(n_envs.div_ceil(group), |w, g| {
            // SAFETY: group `g` and worker `w` are each handed out once at a time.
            let ws = unsafe { scratch.get(w) };
            let actions = unsafe { actions_buf.get(w) };
            for i in g * group..((g + 1) * group).min(n_envs) {
                let region = unsafe { regions.chunk_mut(i) };
                let rng = &mut unsafe { rngs.chunk_mut(i) }[0].0;
                template.reset_into(region, rng);
                let mut env = EnvViewMut::new(region, &layout);
                if desync {
                    let k = rng.below(horizon as usize);
                    for _ in 0..k {
                        for act in actions.iter_mut() {
                            *act = random_action(rng, n_agents);
                        }
                        let r = step_env(&mut env.parts(), template.rules(), actions, rng, &mut ws.step)
                            .expect("generated actions are valid");
                        if r.terminated || r.truncated {
                            template.reset_into(env.bytes_mut(), rng);
                            break;
                        }
                    }
                    let parts = env.parts();
                    parts.counters[COUNTER_TILES_DISCOVERED] = 0;
                    parts.counters[COUNTER_POIS_FOUND] = 0;
                    parts.counters[COUNTER_POIS_SAVED] = 0;
                }
                let view = env.view();
                let bufs = unsafe { ptrs.obs_buffers(i) };
                if let Err(e) = emit(&view, mode, ol, horizon, bufs) {
                    ws.error.get_or_insert(e);
                }
            }
        });
        self.take_error()?;
        // SAFETY: the parallel phase is over; this thread has sole access.
        unsafe {
            std::slice::from_raw_parts_mut(ptrs.rewards, ptrs.rewards_len * n_envs).fill(0.0);
            std::slice::from_raw_parts_mut(ptrs.terminated, n_envs).fill(0);
            std::slice::from_raw_parts_mut(ptrs.truncated, n_envs).fill(0);
        }
        Ok(())
    }

    fn take_error(&mut self) -> Result<()> {
        let mut first = None;
        for ws in self.scratch.iter_mut() {
            if let Some(e) = ws.error.take() {
                first.get_or_insert(e);
            }
        }
        first.map_or(Ok(()), Err)
    }

    /// Steps every env with `actions` (`n_envs * n_agents`, env-major).
    pub fn vec_step(&mut self, actions: &[AgentAction]) -> Result<()> {
        self.live()?;
        let n_agents = self.n_agents();
        let n_envs = self.n_envs();
        if actions.len() != n_envs * n_agents {
            return Err(Error::contract(format!(
                "expected {} actions ({n_envs} envs x {n_agents} agents), got {}",
                n_envs * n_agents,
                actions.len()
            )));
        }
        if let Some(bad) = actions.iter().find(|a| a.radio_target as usize >= n_agents) {
            return Err(Error::contract(format!("radio target {} out of range", bad.radio_target)));
        }

        let ptrs = self.out_ptrs();
        let direct = self.config.variant == Variant::UnpaddedStride;
        let diff = self.config.variant == Variant::DiffSweep;
        let auto_reset = self.config.auto_reset;
        let mode = self.config.mode;
        let per_agent = self.template.rules().dynamics.per_agent_rewards;
        let horizon = self.template.rules().horizon;
        let group = self.group;
        let template = &self.template;
        let rules = template.rules();
        let ol = &self.obs_layout;
        let exec = self.exec.as_ref().expect("open pool");
        let arena = self.arena.as_mut().expect("open pool");
        let layout = *arena.layout();
        let regions = arena.regions();
        let rngs = SharedChunks::new(&mut self.rngs, 1);
        let scratch = &self.scratch;

        exec.for_each_dynamic(n_envs.div_ceil(group), |w, g| {
            // SAFETY: group `g` and worker `w` are each handed out once at a time.
            let ws = unsafe { scratch.get(w) };
            for i in g * group..((g + 1) * group).min(n_envs) {
                let region = unsafe { regions.chunk_mut(i) };
                let rng = &mut unsafe { rngs.chunk_mut(i) }[0].0;
                let mut env = EnvViewMut::new(region, &layout);
                let acts = &actions[i * n_agents..(i + 1) * n_agents];
                let result = match step_env(&mut env.parts(), rules, acts, rng, &mut ws.step) {
                    Ok(r) => r,
                    Err(e) => {
                        ws.error.get_or_insert(e);
                        continue;
                    }
                };
                if per_agent {
                    ws.reward_tmp.copy_from_slice(&ws.step.agent_rewards);
                } else {
                    ws.reward_tmp[0] = result.reward;
                }
                if direct {
                    unsafe { ptrs.write_result(i, &ws.reward_tmp, result) };
                } else {
                    ws.finished.push(Finished { env: i as u32, result });
                    ws.rewards.extend_from_slice(&ws.reward_tmp);
                }
                let done = result.terminated || result.truncated;
                let bufs = unsafe { ptrs.obs_buffers(i) };
                let emitted = if done && auto_reset {
                    template.reset_into(env.bytes_mut(), rng);
                    emit(&env.view(), mode, ol, horizon, bufs)
                } else if diff {
                    emit_diff(&env.view(), mode, ol, horizon, &ws.step, bufs)
                } else {
                    emit(&env.view(), mode, ol, horizon, bufs)
                };
                if let Err(e) = emitted {
                    ws.error.get_or_insert(e);
                }
            }
        });

        // Serial gather of rewards and done flags.
        for ws in self.scratch.iter_mut() {
            let n = ws.reward_tmp.len();
            for (f, r) in ws.finished.iter().zip(ws.rewards.chunks_exact(n)) {
                // SAFETY: single-threaded here; env index is in range.
                unsafe { ptrs.write_result(f.env as usize, r, f.result) };
            }
            ws.finished.clear();
            ws.rewards.clear();
        }
        self.take_error()?;
        if self.config.variant == Variant::TuplePack {
            self.tuple_round_trip();
        }
        Ok(())
    }

    /// Converts outputs to boxed per-env tuples and back, mimicking a binding
    /// layer that repacks every step.
    fn tuple_round_trip(&mut self) {
        let ptrs = self.out_ptrs();
        let n = self.n_envs();
        let packed: Vec<(Box<[f32]>, bool, bool, Box<[f32]>, Box<[f32]>, Box<[f32]>)> = (0..n)
            .map(|i| unsafe {
                let b = ptrs.obs_buffers(i);
                let rewards = std::slice::from_raw_parts(ptrs.rewards.add(i * ptrs.rewards_len), ptrs.rewards_len);
                (
                    rewards.to_vec().into_boxed_slice(),
                    *ptrs.terminated.add(i) != 0,
                    *ptrs.truncated.add(i) != 0,
                    b.obs.map(|s| s.to_vec()).unwrap_or_default().into_boxed_slice(),
                    b.logical.map(|s| s.to_vec()).unwrap_or_default().into_boxed_slice(),
                    b.state.map(|s| s.to_vec()).unwrap_or_default().into_boxed_slice(),
                )
            })
            .collect();
        for (i, (r, term, trunc, obs, logical, state)) in packed.into_iter().enumerate() {
            unsafe {
                ptrs.write_result(i, &r, StepResult { reward: 0.0, terminated: term, truncated: trunc });
                let b = ptrs.obs_buffers(i);
                if let Some(s) = b.obs {
                    s.copy_from_slice(&obs);
                }
                if let Some(s) = b.logical {
                    s.copy_from_slice(&logical);
                }
                if let Some(s) = b.state {
                    s.copy_from_slice(&state);
                }
            }
        }
    }

    /// Joins the workers and releases the arena and owned buffers. Calling it
    /// again does nothing.
    pub fn close(&mut self) {
        self.exec = None;
        self.arena = None;
        self.outputs = OutputStorage::Released;
    }
}

/// Uniform move in [-1, 1]^2 and uniform radio target, drawn in that order.
#[inline]
pub fn random_action(rng: &mut EnvRng, n_agents: usize) -> AgentAction {
    let ax = rng.next_signed();
    let ay = rng.next_signed();
    let radio_target = rng.below(n_agents) as u32;
    AgentAction { ax, ay, radio_target }
}
