use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::plan::{PrimitiveAction, SymbolicStep, TaskPlan, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFlag {
    Hot,
    Cold,
    Clean,
    Sliced,
}

fn one() -> usize {
    1
}

/// Predicate over the final scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalCondition {
    /// At least `count` objects of `category` somewhere inside a `receptacle`
    /// (directly or through a container), or inside `receptacle_id` if set.
    InReceptacle {
        category: String,
        receptacle: String,
        #[serde(default = "one")]
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receptacle_id: Option<String>,
    },
    StateFlag { category: String, flag: StateFlag },
    Examined { category: String },
}

impl GoalCondition {
    pub fn satisfied(&self, scene: &Scene) -> bool {
        match self {
            GoalCondition::InReceptacle { category, receptacle, count, receptacle_id } => {
                let n = scene
                    .objects
                    .iter()
                    .filter(|o| &o.category == category && scene.agent.holding.as_deref() != Some(o.id.as_str()))
                    .filter(|o| {
                        scene.ancestors(&o.id).iter().any(|a| match receptacle_id {
                            Some(id) => &a.id == id,
                            None => &a.category == receptacle,
                        })
                    })
                    .count();
                n >= *count
            }
            GoalCondition::StateFlag { category, flag } => scene.objects.iter().any(|o| {
                &o.category == category
                    && match flag {
                        StateFlag::Hot => o.hot,
                        StateFlag::Cold => o.cold,
                        StateFlag::Clean => o.clean,
                        StateFlag::Sliced => o.sliced,
                    }
            }),
            GoalCondition::Examined { category } => scene.objects.iter().any(|o| &o.category == category && o.examined),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskParams {
    pub target: String,
    pub receptacle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appliance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
}

/// Step of the generator's constructive solution, bound to an object id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalStep {
    pub action: PrimitiveAction,
    pub object_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub task_type: TaskType,
    pub params: TaskParams,
    pub goals: Vec<GoalCondition>,
    pub canonical: Vec<CanonicalStep>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(Error::Schema { path: format!("task {}", self.id), message: "no goals".into() });
        }
        Ok(())
    }

    pub fn canonical_plan(&self) -> TaskPlan {
        TaskPlan::new(
            self.canonical.iter().map(|s| SymbolicStep::new(0, s.action, &s.label, s.context.as_deref())).collect(),
            self.task_type,
        )
    }

    pub fn goals_met(&self, scene: &Scene) -> usize {
        self.goals.iter().filter(|g| g.satisfied(scene)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub id: String,
    pub success: bool,
    pub goals_met: usize,
    pub goals_total: usize,
    pub agent_path_length: usize,
    pub expert_path_length: usize,
}

impl EpisodeResult {
    pub fn goal_ratio(&self) -> f64 {
        if self.goals_total == 0 {
            0.0
        } else {
            self.goals_met as f64 / self.goals_total as f64
        }
    }

    /// Expert length over the longer of the two; 1 when both are zero.
    pub fn path_weight(&self) -> f64 {
        let (e, a) = (self.expert_path_length, self.agent_path_length);
        if e == 0 && a == 0 {
            1.0
        } else {
            e as f64 / e.max(a) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "GC")]
    pub gc: f64,
    #[serde(rename = "PLWSR")]
    pub plwsr: f64,
    #[serde(rename = "PLWGC")]
    pub plwgc: f64,
}

pub fn compute_metrics(results: &[EpisodeResult]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        sr: mean(&|r| r.success as u8 as f64),
        gc: mean(&|r| r.goal_ratio()),
        plwsr: mean(&|r| r.success as u8 as f64 * r.path_weight()),
        plwgc: mean(&|r| r.goal_ratio() * r.path_weight()),
    })
}
