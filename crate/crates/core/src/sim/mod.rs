//! Gridworld simulator with household-object semantics, the episode runner
//! and benchmark metrics.

mod episode;
mod exec;
mod generate;
mod nav;
mod scene;
mod task;

pub use episode::{
    expert_length, observe, observe_from, replay_canonical, run_episode, EpisodeEnv, EpisodeParams, EpisodeReport,
    Observations, StepLog, DEFAULT_DETECT_RADIUS, DEFAULT_FOV_RADIUS, DEFAULT_MAX_SEARCH_ROUNDS,
};
pub use exec::{apply, check, execute_step, settle, StepOutcome, INTERACTION_RANGE};
pub use generate::{all_kinds, generate_task_suite, standard_mix, GeneratedTask, TaskKind, CONTEXT_PHRASE, DEFAULT_WIDTH};
pub use nav::{approach_cells, navigate, shortest_path};
pub use scene::{chebyshev, Agent, Cell, Facing, Scene, SceneObject};
pub use task::{
    compute_metrics, CanonicalStep, EpisodeResult, GoalCondition, Metrics, StateFlag, TaskParams, TaskSpec,
};
