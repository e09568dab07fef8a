//! Procedural task suites. Every task comes with a constructive solution, so
//! solvability holds by construction.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nav::{approach_cells, shortest_path};
use super::scene::{chebyshev, Agent, Cell, Facing, Scene, SceneObject};
use super::task::{CanonicalStep, GoalCondition, StateFlag, TaskParams, TaskSpec};
use crate::localization::ColocationTable;
use crate::plan::{PrimitiveAction, TaskCategory, TaskType};

pub const DEFAULT_WIDTH: usize = 48;
pub const CONTEXT_PHRASE: &str = "the cabinet beneath the coffee machine";

/// A task kind requested from the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskKind {
    pub task_type: TaskType,
    /// Destination is singled out by a spatial phrase among look-alikes.
    #[serde(default)]
    pub context: bool,
}

impl TaskKind {
    pub fn plain(task_type: TaskType) -> Self {
        Self { task_type, context: false }
    }

    pub fn key(&self) -> String {
        if self.context {
            format!("{}@context", self.task_type.key())
        } else {
            self.task_type.key()
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        match key.strip_suffix("@context") {
            Some(base) => TaskType::from_key(base).map(|t| TaskKind { task_type: t, context: true }),
            None => TaskType::from_key(key).map(TaskKind::plain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTask {
    pub scene: Scene,
    pub task: TaskSpec,
    pub instruction: String,
}

const SURFACES: &[&str] =
    &["countertop", "dining_table", "side_table", "coffee_table", "shelf", "desk", "dresser", "sofa", "bed"];
const CLOSABLES: &[&str] = &["cabinet", "drawer"];
const KITCHEN_DESTINATIONS: &[&str] = &["countertop", "dining_table", "side_table", "shelf", "cabinet"];
const PICKABLE: &[&str] = &[
    "apple", "tomato", "potato", "bread", "lettuce", "egg", "mug", "cup", "spoon", "fork", "spatula", "ladle",
    "dish_sponge", "cloth", "soap_bar", "book", "cell_phone", "key_chain", "remote_control", "pen", "pencil",
    "credit_card", "vase", "statue", "alarm_clock", "watch", "newspaper", "pillow", "laptop",
];
const STACK_TARGETS: &[&str] = &["apple", "tomato", "potato", "bread", "egg", "lettuce", "spoon", "fork", "ladle"];
const STACK_CONTAINERS: &[&str] = &["bowl", "plate", "pan", "pot"];
const HEAT_TARGETS: &[&str] = &["apple", "tomato", "potato", "bread", "egg", "mug", "cup"];
const COOL_TARGETS: &[&str] = &["apple", "tomato", "potato", "bread", "egg", "lettuce", "mug", "cup"];
const CLEAN_TARGETS: &[&str] = &["apple", "tomato", "potato", "lettuce", "mug", "cup", "spoon", "fork", "spatula", "ladle"];
const EXAMINE_TARGETS: &[&str] = &[
    "book", "alarm_clock", "cell_phone", "key_chain", "remote_control", "pen", "pencil", "credit_card", "watch",
    "vase", "statue", "newspaper",
];
const SLICE_TARGETS: &[&str] = &["apple", "tomato", "potato", "bread", "lettuce"];
/// Fixtures never used as the starting place of a small object.
const NOT_ORIGINS: &[&str] = &["microwave", "sink", "stove_burner", "toaster", "garbage_can", "fridge"];

fn display(label: &str) -> String {
    label.replace('_', " ")
}

fn prep(receptacle: &str) -> &'static str {
    if CLOSABLES.contains(&receptacle) || ["fridge", "microwave", "garbage_can", "sink"].contains(&receptacle) {
        "in"
    } else {
        "on"
    }
}

/// Abstract layout decided before any coordinates are drawn.
#[derive(Debug, Clone)]
struct Blueprint {
    kind: TaskKind,
    destination: &'static str,
    appliance: Option<&'static str>,
    container: Option<&'static str>,
    /// Small objects and the fixture category each starts in.
    smalls: Vec<(&'static str, &'static str)>,
    fixtures: Vec<&'static str>,
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    table: &'a ColocationTable,
    width: usize,
}

impl Builder<'_> {
    fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        *items.choose(&mut self.rng).expect("nonempty choice")
    }

    /// Likely starting fixture for a small object, weighted by co-location.
    fn origin_for(&mut self, object: &str, allowed: impl Fn(&str) -> bool) -> &'static str {
        let candidates: Vec<(&'static str, f64)> = super::scene::RECEPTACLE_FIXTURES
            .iter()
            .copied()
            .filter(|f| !NOT_ORIGINS.contains(f) && allowed(f))
            .map(|f| (f, self.table.get(object, f)))
            .filter(|(_, p)| *p >= 0.3)
            .collect();
        if candidates.is_empty() {
            let fallback: Vec<&'static str> =
                ["countertop", "dining_table", "side_table"].into_iter().filter(|f| allowed(f)).collect();
            return self.pick(&fallback);
        }
        candidates.choose_weighted(&mut self.rng, |c| c.1).expect("positive weights").0
    }

    fn blueprint(&mut self, kind: TaskKind) -> Blueprint {
        let tt = kind.task_type;
        let slicing = tt.slicing;
        let restrict = |list: &[&'static str]| -> Vec<&'static str> {
            if slicing {
                list.iter().copied().filter(|t| SLICE_TARGETS.contains(t)).collect()
            } else {
                list.to_vec()
            }
        };
        let (target, appliance, container) = match tt.category {
            TaskCategory::PickPlace | TaskCategory::PickTwoPlace => (self.pick(&restrict(PICKABLE)), None, None),
            TaskCategory::StackPlace => (self.pick(&restrict(STACK_TARGETS)), None, Some(self.pick(STACK_CONTAINERS))),
            TaskCategory::CleanPlace => (self.pick(&restrict(CLEAN_TARGETS)), Some("sink"), None),
            TaskCategory::CoolPlace => (self.pick(&restrict(COOL_TARGETS)), Some("fridge"), None),
            TaskCategory::HeatPlace => (self.pick(&restrict(HEAT_TARGETS)), Some("microwave"), None),
            TaskCategory::ExamineInLight => {
                let list = if slicing { SLICE_TARGETS } else { EXAMINE_TARGETS };
                (self.pick(list), Some(self.pick(&["desk_lamp", "floor_lamp"])), None)
            }
        };
        let target_origin = if slicing || kind.context {
            self.origin_for(target, |f| !CLOSABLES.contains(&f))
        } else {
            self.origin_for(target, |_| true)
        };
        let destination: &'static str = if kind.context {
            "cabinet"
        } else {
            let pool: Vec<&'static str> = match tt.category {
                TaskCategory::PickPlace | TaskCategory::PickTwoPlace | TaskCategory::StackPlace => {
                    SURFACES.iter().chain(CLOSABLES).copied().collect()
                }
                _ => KITCHEN_DESTINATIONS.to_vec(),
            };
            let pool: Vec<_> = pool.into_iter().filter(|d| *d != target_origin).collect();
            self.pick(&pool)
        };
        let mut smalls = vec![(target, target_origin)];
        if tt.category == TaskCategory::PickTwoPlace {
            let second = self.origin_for(target, |f| f != destination && (!slicing || !CLOSABLES.contains(&f)));
            smalls.push((target, second));
        }
        if let Some(c) = container {
            let origin = self.origin_for(c, |f| f != destination && !CLOSABLES.contains(&f));
            smalls.push((c, origin));
        }
        if slicing {
            let origin = self.origin_for("knife", |f| !CLOSABLES.contains(&f));
            smalls.push(("knife", origin));
        }
        // Distractors: other small objects in their usual places.
        let used: BTreeSet<&str> = smalls.iter().map(|s| s.0).collect();
        let mut pool: Vec<&'static str> = PICKABLE.iter().copied().filter(|p| !used.contains(p) && *p != "knife").collect();
        pool.shuffle(&mut self.rng);
        let n = self.rng.random_range(3..=5);
        for d in pool.into_iter().take(n) {
            let origin = self.origin_for(d, |f| f != destination);
            smalls.push((d, origin));
        }

        let mut fixtures: Vec<&'static str> = Vec::new();
        let add = |f: &'static str, fixtures: &mut Vec<&'static str>| {
            if !fixtures.contains(&f) {
                fixtures.push(f);
            }
        };
        add(destination, &mut fixtures);
        if let Some(a) = appliance {
            add(a, &mut fixtures);
        }
        for (_, origin) in &smalls {
            add(origin, &mut fixtures);
        }
        if kind.context {
            add("coffee_machine", &mut fixtures);
        }
        let mut extra: Vec<&'static str> = ["countertop", "dining_table", "shelf", "sofa", "desk", "fridge", "stove_burner", "garbage_can", "side_table"]
            .into_iter()
            .filter(|f| !fixtures.contains(f) && !(kind.context && *f == "cabinet"))
            .collect();
        extra.shuffle(&mut self.rng);
        let n = self.rng.random_range(2..=4);
        for f in extra.into_iter().take(n) {
            add(f, &mut fixtures);
        }
        Blueprint { kind, destination, appliance, container, smalls, fixtures }
    }

    fn interior_walls(&mut self) -> Vec<Cell> {
        let w = self.width;
        let mut walls = BTreeSet::new();
        for i in 0..w {
            walls.extend([(i, 0), (i, w - 1), (0, i), (w - 1, i)]);
        }
        if w >= 16 {
            // One vertical and one horizontal partition, each with two doorways.
            let vx = self.rng.random_range(w / 3..=2 * w / 3);
            let hy = self.rng.random_range(w / 3..=2 * w / 3);
            let doors_v = [self.rng.random_range(2..hy - 2), self.rng.random_range(hy + 2..w - 3)];
            let doors_h = [self.rng.random_range(2..vx - 2), self.rng.random_range(vx + 2..w - 3)];
            for y in 1..w - 1 {
                if !doors_v.iter().any(|d| y == *d || y == d + 1) {
                    walls.insert((vx, y));
                }
            }
            for x in 1..w - 1 {
                if !doors_h.iter().any(|d| x == *d || x == d + 1) {
                    walls.insert((x, hy));
                }
            }
        }
        walls.into_iter().collect()
    }

    fn free_spot(&mut self, walls: &BTreeSet<Cell>, taken: &[Cell], near: Option<(Cell, usize)>) -> Option<Cell> {
        let w = self.width;
        for _ in 0..2000 {
            let c = match near {
                Some((center, r)) => {
                    let x = self.rng.random_range(center.0.saturating_sub(r)..=(center.0 + r).min(w - 1));
                    let y = self.rng.random_range(center.1.saturating_sub(r)..=(center.1 + r).min(w - 1));
                    (x, y)
                }
                None => (self.rng.random_range(2..w - 2), self.rng.random_range(2..w - 2)),
            };
            if c.0 < 2 || c.1 < 2 || c.0 > w - 3 || c.1 > w - 3 {
                continue;
            }
            let clear_of_walls = (c.0 - 1..=c.0 + 1).all(|x| (c.1 - 1..=c.1 + 1).all(|y| !walls.contains(&(x, y))));
            if clear_of_walls && taken.iter().all(|t| chebyshev(*t, c) >= 3) {
                return Some(c);
            }
        }
        None
    }

    fn attempt(&mut self, bp: &Blueprint, id: &str) -> Option<(Scene, TaskSpec)> {
        let w = self.width;
        let wall_list = self.interior_walls();
        let walls: BTreeSet<Cell> = wall_list.iter().copied().collect();
        let mut objects: Vec<SceneObject> = Vec::new();
        let mut taken: Vec<Cell> = Vec::new();
        let mut counters: BTreeMap<String, usize> = BTreeMap::new();
        let next_id = |cat: &str, counters: &mut BTreeMap<String, usize>| {
            let n = counters.entry(cat.to_string()).or_insert(0);
            *n += 1;
            format!("{cat}_{n}")
        };

        let mut spawn_near = None;
        let mut context_ids = None;
        if bp.kind.context {
            let cm = self.free_spot(&walls, &taken, None)?;
            let below = (cm.0, cm.1 + 1);
            if below.1 > w - 3 || cm.1 < 5 {
                return None;
            }
            let dx: isize = if self.rng.random_bool(0.5) { 3 } else { -3 };
            let other = (cm.0.checked_add_signed(dx)?, cm.1 - 3);
            for c in [below, other] {
                let around = (c.0.saturating_sub(1)..=c.0 + 1).all(|x| (c.1.saturating_sub(1)..=c.1 + 1).all(|y| !walls.contains(&(x, y))));
                if !around || c.0 < 2 || c.0 > w - 3 {
                    return None;
                }
            }
            let cm_id = next_id("coffee_machine", &mut counters);
            let other_id = next_id("cabinet", &mut counters);
            let right_id = next_id("cabinet", &mut counters);
            objects.push(SceneObject::of_category(&cm_id, "coffee_machine", cm));
            objects.push(SceneObject::of_category(&other_id, "cabinet", other));
            objects.push(SceneObject::of_category(&right_id, "cabinet", below));
            taken.extend([cm, below, other]);
            spawn_near = Some(cm);
            context_ids = Some(right_id);
        }
        for f in &bp.fixtures {
            if bp.kind.context && (*f == "coffee_machine" || *f == "cabinet") {
                continue;
            }
            let c = self.free_spot(&walls, &taken, None)?;
            taken.push(c);
            let fid = next_id(f, &mut counters);
            objects.push(SceneObject::of_category(&fid, f, c));
        }
        let fixture_of = |cat: &str, objects: &[SceneObject]| -> Option<usize> {
            objects.iter().position(|o| o.category == cat && o.is_fixture())
        };
        let mut small_ids = Vec::new();
        for (cat, origin) in &bp.smalls {
            let oi = fixture_of(origin, &objects)?;
            let sid = next_id(cat, &mut counters);
            let mut o = SceneObject::of_category(&sid, cat, objects[oi].cell);
            o.clean = false;
            objects[oi].contains.push(sid.clone());
            o.cell = objects[oi].cell;
            objects.push(o);
            small_ids.push(sid);
        }

        // Spawn and reachability.
        let mut scene = Scene {
            width: w,
            walls: wall_list,
            objects,
            agent: Agent { cell: (1, 1), facing: Facing::Up, holding: None },
        };
        let blocked = scene.blocked_grid();
        let spawn = loop {
            let c = match spawn_near {
                Some(cm) => self.free_spot(&walls, &[], Some(((cm.0, cm.1 + 3), 2)))?,
                None => self.free_spot(&walls, &[], None)?,
            };
            if !blocked[c.1 * w + c.0] {
                break c;
            }
        };
        scene.agent.cell = spawn;
        for o in scene.objects.iter().filter(|o| o.is_fixture()) {
            let targets = approach_cells(w, &blocked, o.cell);
            shortest_path(w, &blocked, spawn, &targets)?;
        }
        scene.validate().ok()?;

        let task = self.spec(bp, id, &scene, &small_ids, context_ids);
        Some((scene, task))
    }

    fn spec(&self, bp: &Blueprint, id: &str, scene: &Scene, small_ids: &[String], context_id: Option<String>) -> TaskSpec {
        let tt = bp.kind.task_type;
        let obj = |id: &str| scene.object(id).expect("generated object");
        let parent = |id: &str| scene.parent_of(id).expect("small objects start in a fixture").clone();
        let step = |action, o: &SceneObject, ctx: Option<&str>| CanonicalStep {
            action,
            object_id: o.id.clone(),
            label: o.category.clone(),
            context: ctx.map(String::from),
        };
        let destination = match &context_id {
            Some(cid) => obj(cid).clone(),
            None => scene
                .objects
                .iter()
                .find(|o| o.category == bp.destination && o.is_fixture())
                .expect("destination placed")
                .clone(),
        };
        let ctx = context_id.as_ref().map(|_| CONTEXT_PHRASE);
        let pick = |o: &SceneObject, steps: &mut Vec<CanonicalStep>| {
            let p = parent(&o.id);
            if p.openable {
                steps.push(step(PrimitiveAction::Open, &p, None));
                steps.push(step(PrimitiveAction::PickUp, o, None));
                steps.push(step(PrimitiveAction::Close, &p, None));
            } else {
                steps.push(step(PrimitiveAction::PickUp, o, None));
            }
        };
        let place = |d: &SceneObject, ctx: Option<&str>, steps: &mut Vec<CanonicalStep>| {
            if d.openable {
                steps.push(step(PrimitiveAction::Open, d, ctx));
                steps.push(step(PrimitiveAction::Put, d, ctx));
                steps.push(step(PrimitiveAction::Close, d, ctx));
            } else {
                steps.push(step(PrimitiveAction::Put, d, ctx));
            }
        };

        let target = obj(&small_ids[0]).clone();
        let mut steps = Vec::new();
        if tt.slicing {
            let knife_id = small_ids.iter().find(|s| obj(s).category == "knife").expect("knife generated");
            let knife = obj(knife_id).clone();
            pick(&knife, &mut steps);
            steps.push(step(PrimitiveAction::Slice, &target, None));
            steps.push(step(PrimitiveAction::Put, &parent(&target.id), None));
        }
        let appliance = bp.appliance.map(|a| {
            scene.objects.iter().find(|o| o.category == a && o.is_fixture()).expect("appliance placed").clone()
        });
        let mut goals = Vec::new();
        let in_dest = |cat: &str, count: usize| GoalCondition::InReceptacle {
            category: cat.into(),
            receptacle: destination.category.clone(),
            count,
            receptacle_id: context_id.clone(),
        };
        match tt.category {
            TaskCategory::PickPlace => {
                pick(&target, &mut steps);
                place(&destination, ctx, &mut steps);
                goals.push(in_dest(&target.category, 1));
            }
            TaskCategory::PickTwoPlace => {
                let second = obj(&small_ids[1]).clone();
                pick(&target, &mut steps);
                place(&destination, ctx, &mut steps);
                pick(&second, &mut steps);
                place(&destination, ctx, &mut steps);
                goals.push(in_dest(&target.category, 2));
            }
            TaskCategory::StackPlace => {
                let c = obj(&small_ids[1]).clone();
                pick(&target, &mut steps);
                steps.push(step(PrimitiveAction::Put, &c, None));
                steps.push(step(PrimitiveAction::PickUp, &c, None));
                place(&destination, ctx, &mut steps);
                goals.push(GoalCondition::InReceptacle {
                    category: target.category.clone(),
                    receptacle: c.category.clone(),
                    count: 1,
                    receptacle_id: None,
                });
                goals.push(in_dest(&c.category, 1));
            }
            TaskCategory::HeatPlace | TaskCategory::CoolPlace => {
                let a = appliance.clone().expect("appliance");
                pick(&target, &mut steps);
                steps.push(step(PrimitiveAction::Open, &a, None));
                steps.push(step(PrimitiveAction::Put, &a, None));
                steps.push(step(PrimitiveAction::Close, &a, None));
                if tt.category == TaskCategory::HeatPlace {
                    steps.push(step(PrimitiveAction::ToggleOn, &a, None));
                    steps.push(step(PrimitiveAction::ToggleOff, &a, None));
                }
                steps.push(step(PrimitiveAction::Open, &a, None));
                steps.push(step(PrimitiveAction::PickUp, &target, None));
                steps.push(step(PrimitiveAction::Close, &a, None));
                place(&destination, ctx, &mut steps);
                let flag = if tt.category == TaskCategory::HeatPlace { StateFlag::Hot } else { StateFlag::Cold };
                goals.push(GoalCondition::StateFlag { category: target.category.clone(), flag });
                goals.push(in_dest(&target.category, 1));
            }
            TaskCategory::CleanPlace => {
                let a = appliance.clone().expect("appliance");
                pick(&target, &mut steps);
                steps.push(step(PrimitiveAction::Put, &a, None));
                steps.push(step(PrimitiveAction::ToggleOn, &a, None));
                steps.push(step(PrimitiveAction::ToggleOff, &a, None));
                steps.push(step(PrimitiveAction::PickUp, &target, None));
                place(&destination, ctx, &mut steps);
                goals.push(GoalCondition::StateFlag { category: target.category.clone(), flag: StateFlag::Clean });
                goals.push(in_dest(&target.category, 1));
            }
            TaskCategory::ExamineInLight => {
                let lamp = appliance.clone().expect("lamp");
                pick(&target, &mut steps);
                steps.push(step(PrimitiveAction::ToggleOn, &lamp, None));
                steps.push(step(PrimitiveAction::ToggleOff, &lamp, None));
                goals.push(GoalCondition::Examined { category: target.category.clone() });
            }
        }
        if tt.slicing {
            goals.push(GoalCondition::StateFlag { category: target.category.clone(), flag: StateFlag::Sliced });
        }
        TaskSpec {
            id: id.to_string(),
            task_type: tt,
            params: TaskParams {
                target: target.category.clone(),
                receptacle: destination.category.clone(),
                tool: tt.slicing.then(|| "knife".to_string()),
                appliance: bp.appliance.map(String::from),
                container: bp.container.map(String::from),
            },
            goals,
            canonical: steps,
        }
    }
}

fn instruction_templates(kind: TaskKind, t: &str, d: &str, extra: Option<&str>) -> Vec<String> {
    let p = prep(d);
    let tt = kind.task_type;
    let x = extra.map(display).unwrap_or_default();
    let mut out: Vec<String> = match (tt.category, tt.slicing) {
        (TaskCategory::PickPlace, false) => vec![
            format!("put the {t} {p} the {d}"),
            format!("move the {t} to the {d}"),
            format!("take the {t} and place it {p} the {d}"),
            format!("could you put a {t} {p} the {d}"),
        ],
        (TaskCategory::PickPlace, true) => vec![
            format!("put a slice of {t} {p} the {d}"),
            format!("slice the {t} and put it {p} the {d}"),
            format!("cut up the {t} and leave it {p} the {d}"),
        ],
        (TaskCategory::StackPlace, false) => vec![
            format!("put the {t} in a {x} and move it to the {d}"),
            format!("place the {x} holding the {t} {p} the {d}"),
            format!("carry the {t} in a {x} to the {d}"),
        ],
        (TaskCategory::StackPlace, true) => vec![
            format!("put a sliced {t} in a {x} and set it {p} the {d}"),
            format!("slice the {t}, put it in the {x} and move that to the {d}"),
        ],
        (TaskCategory::CleanPlace, false) => vec![
            format!("rinse the {t} and put it {p} the {d}"),
            format!("put a clean {t} {p} the {d}"),
            format!("wash the {t} in the sink, then leave it {p} the {d}"),
        ],
        (TaskCategory::CleanPlace, true) => vec![
            format!("put a rinsed slice of {t} {p} the {d}"),
            format!("slice the {t}, wash it and put it {p} the {d}"),
        ],
        (TaskCategory::CoolPlace, false) => vec![
            format!("chill the {t} and put it {p} the {d}"),
            format!("put a cold {t} {p} the {d}"),
            format!("cool the {t} in the fridge, then place it {p} the {d}"),
        ],
        (TaskCategory::CoolPlace, true) => vec![
            format!("put a chilled slice of {t} {p} the {d}"),
            format!("slice the {t}, cool it and put it {p} the {d}"),
        ],
        (TaskCategory::HeatPlace, false) => vec![
            format!("heat the {t} and put it {p} the {d}"),
            format!("put a warm {t} {p} the {d}"),
            format!("warm up the {t} in the microwave, then set it {p} the {d}"),
        ],
        (TaskCategory::HeatPlace, true) => vec![
            format!("bring me a heated {t} slice {p} the {d}"),
            format!("slice the {t}, heat it and put it {p} the {d}"),
        ],
        (TaskCategory::PickTwoPlace, false) => vec![
            format!("put two {t}s {p} the {d}"),
            format!("move both {t}s to the {d}"),
            format!("place a pair of {t}s {p} the {d}"),
        ],
        (TaskCategory::PickTwoPlace, true) => vec![
            format!("slice a {t} and put two {t}s {p} the {d}"),
            format!("put two {t}s {p} the {d}, one of them sliced"),
        ],
        (TaskCategory::ExamineInLight, false) => vec![
            format!("look at the {t} under the {x}"),
            format!("examine the {t} by the light of the {x}"),
            format!("pick up the {t} and check it with the {x} on"),
        ],
        (TaskCategory::ExamineInLight, true) => vec![
            format!("slice the {t} and examine it under the {x}"),
            format!("look at a sliced {t} by the {x}"),
        ],
    };
    if kind.context {
        out = vec![
            format!("put the {t} in {CONTEXT_PHRASE}"),
            format!("store the {t} in {CONTEXT_PHRASE}"),
            format!("place the {t} inside {CONTEXT_PHRASE}"),
        ];
    }
    out
}

fn instruction_for(kind: TaskKind, task: &TaskSpec, rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    let t = display(&task.params.target);
    let d = display(&task.params.receptacle);
    let extra = task.params.container.as_deref().or(task.params.appliance.as_deref());
    let mut options = instruction_templates(kind, &t, &d, extra);
    options.shuffle(rng);
    for o in &options {
        if used.insert(o.clone()) {
            return o.clone();
        }
    }
    for n in 2.. {
        let o = format!("{} ({n})", options[0]);
        if used.insert(o.clone()) {
            return o;
        }
    }
    unreachable!()
}

/// Generate `count` tasks of each kind. Pure in `seed`.
pub fn generate_task_suite(seed: u64, counts: &[(TaskKind, usize)], width: usize, table: &ColocationTable) -> Vec<GeneratedTask> {
    let mut out = Vec::new();
    let mut used = BTreeSet::new();
    let mut index = 0u64;
    for &(kind, n) in counts {
        for _ in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index);
            let id = format!("t{:03}_{}", index, kind.key().replace(['+', '@'], "_"));
            let mut builder = Builder { rng, table, width };
            let (scene, task) = loop {
                let bp = builder.blueprint(kind);
                if let Some(done) = builder.attempt(&bp, &id) {
                    break done;
                }
            };
            let instruction = instruction_for(kind, &task, &mut builder.rng, &mut used);
            out.push(GeneratedTask { scene, task, instruction });
            index += 1;
        }
    }
    out
}

/// One of each of the 14 task types.
pub fn all_kinds() -> Vec<TaskKind> {
    TaskType::all().map(TaskKind::plain).collect()
}

/// Categories that also appear with a context phrase in the standard mix.
const CONTEXT_CATEGORIES: [TaskCategory; 6] = [
    TaskCategory::PickPlace,
    TaskCategory::HeatPlace,
    TaskCategory::CoolPlace,
    TaskCategory::CleanPlace,
    TaskCategory::StackPlace,
    TaskCategory::PickTwoPlace,
];

/// The 14 task types plus six context kinds, `copies` of each.
pub fn standard_mix(copies: usize) -> Vec<(TaskKind, usize)> {
    all_kinds()
        .into_iter()
        .chain(CONTEXT_CATEGORIES.iter().map(|&c| TaskKind { task_type: TaskType::new(c, false), context: true }))
        .map(|k| (k, copies))
        .collect()
}
