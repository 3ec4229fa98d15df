//! A vectorized multi-agent hide-and-seek engine. Every environment lives in
//! one fixed-stride region of a flat byte arena; a pool steps them in
//! parallel and writes observations into stable, caller-visible buffers.

pub mod arena;
pub mod bench;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod exec;
pub mod layout;
pub mod map;
pub mod observation;
pub mod rng;
pub mod slab;
pub mod smoke;
pub mod vecenv;

pub use arena::{allocate_arena, build_pristine, EnvTemplate, EnvironmentArena};
pub use dynamics::{step_env, AgentAction, DynamicsConfig, RewardConfig, Rules, StepResult, StepScratch};
pub use env::{EnvView, EnvViewMut};
pub use error::{Error, Result};
pub use exec::{Executor, WaitPolicy};
pub use layout::{compute_layout, ArenaLayout, KnowledgeMode, StridePadding};
pub use map::{build_map_spec, MapSpec};
pub use observation::{ObsLayout, ObsMode};
pub use rng::EnvRng;
pub use vecenv::{BufferDescriptor, BufferRole, DType, Variant, VecConfig, VecEnv, ABI_VERSION};
