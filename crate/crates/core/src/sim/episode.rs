use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::exec::{apply, execute_step, INTERACTION_RANGE};
use super::nav::navigate;
use super::scene::{chebyshev, Cell, Scene};
use super::task::{EpisodeResult, TaskSpec};
use crate::error::{Error, Result};
use crate::llm::{LlmError, LlmProvider};
use crate::localization::{
    localize, ColocationTable, GoalMethod, GridGoal, InstanceList, InstanceRecord, LocalizeContext, LocalizeParams,
    SemanticMap,
};
use crate::pipeline::PromptSet;
use crate::plan::{PrimitiveAction, SymbolicStep, TaskCategory, TaskPlan};

pub const DEFAULT_FOV_RADIUS: usize = 5;
pub const DEFAULT_DETECT_RADIUS: usize = 5;
pub const DEFAULT_MAX_SEARCH_ROUNDS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    /// Radius at which fixtures and free space are observed.
    pub fov_radius: usize,
    /// Radius at which small pickupable objects are recognised.
    pub detect_radius: usize,
    pub max_search_rounds: usize,
    pub localize: LocalizeParams,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        Self {
            fov_radius: DEFAULT_FOV_RADIUS,
            detect_radius: DEFAULT_DETECT_RADIUS,
            max_search_rounds: DEFAULT_MAX_SEARCH_ROUNDS,
            localize: LocalizeParams::default(),
        }
    }
}

/// Agent's accumulated knowledge of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub map: SemanticMap,
    pub instances: InstanceList,
}

impl Observations {
    pub fn new(width: usize, categories: impl IntoIterator<Item = String>) -> Self {
        Self { map: SemanticMap::new(width, categories), instances: InstanceList::default() }
    }

    /// Observer for a scene whose categories are all known to the map.
    pub fn for_scene(scene: &Scene) -> Self {
        Self::new(scene.width, scene.objects.iter().map(|o| o.category.clone()))
    }
}

/// Record what the agent sees from `from`. Monotone: only adds.
pub fn observe_from(scene: &Scene, from: Cell, obs: &mut Observations, fov_radius: usize, detect_radius: usize) {
    let w = scene.width;
    let blocked = scene.blocked_grid();
    for y in from.1.saturating_sub(fov_radius)..=(from.1 + fov_radius).min(w - 1) {
        for x in from.0.saturating_sub(fov_radius)..=(from.0 + fov_radius).min(w - 1) {
            if blocked[y * w + x] {
                obs.map.mark_seen(x, y);
            } else {
                obs.map.mark_free(x, y);
            }
        }
    }
    for o in &scene.objects {
        if scene.agent.holding.as_deref() == Some(o.id.as_str()) {
            continue;
        }
        let radius = if o.is_fixture() { fov_radius } else { detect_radius };
        if chebyshev(o.cell, from) <= radius {
            obs.map.mark(o.cell.0, o.cell.1, &o.category);
            obs.instances.upsert(InstanceRecord { id: o.id.clone(), label: o.category.clone(), x: o.cell.0, y: o.cell.1 });
        }
    }
}

pub fn observe(scene: &Scene, obs: &mut Observations, fov_radius: usize, detect_radius: usize) {
    observe_from(scene, scene.agent.cell, obs, fov_radius, detect_radius);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub index: usize,
    pub step: String,
    pub path_length: usize,
    pub search_rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GridGoal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub result: EpisodeResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<TaskPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning_error: Option<String>,
    pub steps: Vec<StepLog>,
}

/// Shared services for localization during an episode.
pub struct EpisodeEnv<'a> {
    pub provider: Option<&'a dyn LlmProvider>,
    pub prompts: &'a PromptSet,
    pub table: &'a ColocationTable,
    pub params: &'a EpisodeParams,
}

fn is_cassette_miss(e: &Error) -> bool {
    matches!(e.llm(), Some(LlmError::CassetteMiss { .. }))
}

fn step_text(step: &SymbolicStep) -> String {
    crate::plan::render_steps(std::slice::from_ref(step)).trim_end().to_string()
}

fn mark_inspected(mask: &mut [bool], width: usize, around: Cell, radius: usize) {
    for y in around.1.saturating_sub(radius)..=(around.1 + radius).min(width - 1) {
        for x in around.0.saturating_sub(radius)..=(around.0 + radius).min(width - 1) {
            mask[y * width + x] = true;
        }
    }
}

struct Walker<'a, 'e> {
    scene: Scene,
    obs: Observations,
    env: &'a EpisodeEnv<'e>,
    task: &'a TaskSpec,
    path_length: usize,
}

impl Walker<'_, '_> {
    fn walk(&mut self, goal: GridGoal, inspected: Option<&mut Vec<bool>>) -> Result<usize> {
        let p = self.env.params;
        let path = navigate(&mut self.scene, goal)?;
        let mut mask = inspected;
        for &cell in &path {
            observe_from(&self.scene, cell, &mut self.obs, p.fov_radius, p.detect_radius);
            if let Some(m) = mask.as_deref_mut() {
                mark_inspected(m, self.scene.width, cell, p.detect_radius);
            }
        }
        if let Some(m) = mask {
            mark_inspected(m, self.scene.width, self.scene.agent.cell, p.detect_radius);
        }
        self.path_length += path.len();
        Ok(path.len())
    }

    /// Ids that must not be chosen for this step.
    fn excluded(&self, step: &SymbolicStep) -> BTreeSet<String> {
        let mut ids: BTreeSet<String> = self.scene.agent.holding.iter().cloned().collect();
        if step.primitive() == Some(PrimitiveAction::PickUp) {
            let shut = |id: &str| self.scene.ancestors(id).iter().any(|a| a.openable && !a.open);
            ids.extend(self.scene.objects.iter().filter(|o| shut(&o.id)).map(|o| o.id.clone()));
            if self.task.task_type.category == TaskCategory::PickTwoPlace {
                ids.extend(self.scene.objects.iter().filter(|o| o.moved).map(|o| o.id.clone()));
            }
        }
        ids
    }

    fn known(&self, step: &SymbolicStep, excluded: &BTreeSet<String>) -> bool {
        self.obs.instances.with_label(&step.object_label).any(|r| !excluded.contains(&r.id))
    }

    /// Localize and approach the step's object, searching while it is
    /// unobserved. Returns (path length, rounds, final goal).
    fn approach(&mut self, step: &SymbolicStep) -> Result<(usize, usize, Option<GridGoal>)> {
        let p = self.env.params;
        let w = self.scene.width;
        let mut inspected = vec![false; w * w];
        let mut walked = 0;
        for round in 1..=p.max_search_rounds.max(1) {
            let excluded = self.excluded(step);
            let ctx = LocalizeContext {
                map: &self.obs.map,
                instances: &self.obs.instances,
                agent: GridGoal::new(self.scene.agent.cell.0, self.scene.agent.cell.1),
                excluded_ids: &excluded,
                inspected: Some(&inspected),
                provider: self.env.provider,
                prompts: self.env.prompts,
                table: self.env.table,
            };
            let was_known = self.known(step, &excluded);
            let loc = localize(step, &ctx, &p.localize);
            if let Some(e @ LlmError::CassetteMiss { .. }) = loc.error {
                return Err(Error::Llm(e));
            }
            if was_known || loc.method == GoalMethod::Observed {
                walked += self.walk(loc.goal, None)?;
                return Ok((walked, round, Some(loc.goal)));
            }
            match self.walk(loc.goal, Some(&mut inspected)) {
                Ok(n) => walked += n,
                Err(Error::Unreachable { .. }) => mark_inspected(&mut inspected, w, (loc.goal.x, loc.goal.y), 0),
                Err(e) => return Err(e),
            }
            if self.known(step, &excluded) {
                continue;
            }
            if inspected.iter().all(|m| *m) {
                break;
            }
        }
        Err(Error::TargetNotFound { step: step.index, label: step.object_label.clone() })
    }

    fn run_step(&mut self, step: &SymbolicStep) -> Result<StepLog> {
        let mut log = StepLog {
            index: step.index,
            step: step_text(step),
            path_length: 0,
            search_rounds: 0,
            goal: None,
            object_id: None,
            error: None,
        };
        let before = self.path_length;
        let approached = self.approach(step);
        log.path_length = self.path_length - before;
        match approached {
            Ok((_, rounds, goal)) => {
                log.search_rounds = rounds;
                log.goal = goal;
            }
            Err(e) if is_cassette_miss(&e) => return Err(e),
            Err(e) => {
                log.error = Some(e.to_string());
                return Ok(log);
            }
        }
        match execute_step(&mut self.scene, step) {
            Ok(out) => log.object_id = Some(out.object_id),
            Err(e) => log.error = Some(e.to_string()),
        }
        let p = self.env.params;
        observe(&self.scene, &mut self.obs, p.fov_radius, p.detect_radius);
        Ok(log)
    }
}

/// Plan once, then observe, localize, navigate and execute each step. Step
/// failures are logged and skipped. A planning failure yields a failed
/// episode, except for cassette misses, which abort.
pub fn run_episode<F>(scene: &Scene, task: &TaskSpec, instruction: &crate::plan::Instruction, planner: F, env: &EpisodeEnv<'_>) -> Result<EpisodeReport>
where
    F: FnOnce(&crate::plan::Instruction) -> Result<TaskPlan>,
{
    let expert = expert_length(scene, task)?;
    let goals_total = task.goals.len();
    let plan = match planner(instruction) {
        Ok(plan) => plan,
        Err(e) if is_cassette_miss(&e) => return Err(e),
        Err(e @ (Error::PlanningExhausted { .. } | Error::ClassificationFailed(_) | Error::Llm(_))) => {
            return Ok(EpisodeReport {
                result: EpisodeResult {
                    id: task.id.clone(),
                    success: false,
                    goals_met: task.goals_met(scene),
                    goals_total,
                    agent_path_length: 0,
                    expert_path_length: expert,
                },
                plan: None,
                planning_error: Some(e.to_string()),
                steps: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let mut walker = Walker { scene: scene.clone(), obs: Observations::for_scene(scene), env, task, path_length: 0 };
    let p = env.params;
    observe(&walker.scene, &mut walker.obs, p.fov_radius, p.detect_radius);
    let mut steps = Vec::new();
    for step in &plan.steps {
        steps.push(walker.run_step(step)?);
    }
    let met = task.goals_met(&walker.scene);
    Ok(EpisodeReport {
        result: EpisodeResult {
            id: task.id.clone(),
            success: met == goals_total,
            goals_met: met,
            goals_total,
            agent_path_length: walker.path_length,
            expert_path_length: expert,
        },
        plan: Some(plan),
        planning_error: None,
        steps,
    })
}

/// Replay the canonical solution with full knowledge of object positions.
/// Returns the final scene and the path length walked.
pub fn replay_canonical(scene: &Scene, task: &TaskSpec) -> Result<(Scene, usize)> {
    let mut s = scene.clone();
    let mut length = 0;
    for (i, step) in task.canonical.iter().enumerate() {
        let cell = s.object(&step.object_id).ok_or_else(|| Error::TargetNotFound { step: i + 1, label: step.object_id.clone() })?.cell;
        if chebyshev(s.agent.cell, cell) > INTERACTION_RANGE {
            length += navigate(&mut s, GridGoal::new(cell.0, cell.1))?.len();
        }
        apply(&mut s, i + 1, step.action, &step.object_id)?;
    }
    Ok((s, length))
}

/// Path length of the canonical solution.
pub fn expert_length(scene: &Scene, task: &TaskSpec) -> Result<usize> {
    replay_canonical(scene, task).map(|(_, n)| n)
}
