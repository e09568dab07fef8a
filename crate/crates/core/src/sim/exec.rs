use serde::{Deserialize, Serialize};

use super::scene::{chebyshev, Scene, HEATERS, LAMPS};
use crate::error::{Error, Result};
use crate::plan::{normalize_label, PrimitiveAction, SymbolicStep};

/// Chebyshev distance at which the agent can interact with an object.
pub const INTERACTION_RANGE: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub object_id: String,
}

fn failed(step: usize, reason: impl Into<String>) -> Error {
    Error::PreconditionFailed { step, reason: reason.into() }
}

fn in_closed_container(scene: &Scene, id: &str) -> bool {
    scene.ancestors(id).iter().any(|a| a.openable && !a.open)
}

/// Check whether `action` can be applied to object `id` right now.
pub fn check(scene: &Scene, step: usize, action: PrimitiveAction, id: &str) -> Result<()> {
    let obj = scene.object(id).ok_or_else(|| Error::TargetNotFound { step, label: id.into() })?;
    let holding = scene.agent.holding.as_deref();
    if holding == Some(id) && action != PrimitiveAction::GotoLandmark {
        return Err(failed(step, format!("`{id}` is in the hand")));
    }
    match action {
        PrimitiveAction::PickUp => {
            if holding.is_some() {
                return Err(failed(step, "hand is already full"));
            }
            if !obj.pickupable {
                return Err(failed(step, format!("`{id}` cannot be picked up")));
            }
            if in_closed_container(scene, id) {
                return Err(failed(step, format!("`{id}` is inside a closed container")));
            }
        }
        PrimitiveAction::Put => {
            let Some(h) = holding else { return Err(failed(step, "nothing in hand")) };
            if !obj.receptacle {
                return Err(failed(step, format!("`{id}` is not a receptacle")));
            }
            if obj.openable && !obj.open {
                return Err(failed(step, format!("`{id}` is closed")));
            }
            if in_closed_container(scene, id) {
                return Err(failed(step, format!("`{id}` is inside a closed container")));
            }
            if scene.descendants(h).iter().any(|d| d == id) {
                return Err(failed(step, format!("`{id}` is inside the held object")));
            }
        }
        PrimitiveAction::Open | PrimitiveAction::Close => {
            if !obj.openable {
                return Err(failed(step, format!("`{id}` cannot be opened or closed")));
            }
        }
        PrimitiveAction::ToggleOn | PrimitiveAction::ToggleOff => {
            if !obj.togglable {
                return Err(failed(step, format!("`{id}` has no switch")));
            }
        }
        PrimitiveAction::Slice => {
            let knife = holding.and_then(|h| scene.object(h)).is_some_and(|o| o.category == "knife");
            if !knife {
                return Err(failed(step, "slicing needs a knife in hand"));
            }
            if !obj.sliceable {
                return Err(failed(step, format!("`{id}` cannot be sliced")));
            }
            if in_closed_container(scene, id) {
                return Err(failed(step, format!("`{id}` is inside a closed container")));
            }
        }
        PrimitiveAction::GotoLandmark => {}
    }
    Ok(())
}

/// Apply `action` to a specific object, then let appliances act.
pub fn apply(scene: &mut Scene, step: usize, action: PrimitiveAction, id: &str) -> Result<()> {
    check(scene, step, action, id)?;
    let i = scene.index_of(id).expect("checked");
    match action {
        PrimitiveAction::PickUp => {
            scene.detach(id);
            let here = scene.agent.cell;
            scene.relocate(id, here);
            scene.agent.holding = Some(id.to_string());
        }
        PrimitiveAction::Put => {
            let held = scene.agent.holding.take().expect("checked");
            let cell = scene.objects[i].cell;
            scene.objects[i].contains.push(held.clone());
            scene.relocate(&held, cell);
            scene.object_mut(&held).expect("held object exists").moved = true;
        }
        PrimitiveAction::Open => scene.objects[i].open = true,
        PrimitiveAction::Close => scene.objects[i].open = false,
        PrimitiveAction::ToggleOn => {
            let was_on = scene.objects[i].powered;
            scene.objects[i].powered = true;
            let category = scene.objects[i].category.clone();
            if !was_on && HEATERS.contains(&category.as_str()) {
                for d in scene.descendants(id) {
                    let o = scene.object_mut(&d).expect("descendant exists");
                    if o.heatable {
                        o.hot = true;
                        o.cold = false;
                    }
                }
                if category == "cooker" {
                    scene.objects[i].powered = false;
                }
            }
        }
        PrimitiveAction::ToggleOff => scene.objects[i].powered = false,
        PrimitiveAction::Slice => scene.objects[i].sliced = true,
        PrimitiveAction::GotoLandmark => {}
    }
    settle(scene);
    Ok(())
}

/// Continuous appliance effects: closed fridges cool their contents, running
/// sinks clean theirs, and a held object next to a lit lamp is examined.
pub fn settle(scene: &mut Scene) {
    let mut cool = Vec::new();
    let mut clean = Vec::new();
    for o in &scene.objects {
        if o.category == "fridge" && !o.open {
            cool.extend(scene.descendants(&o.id));
        }
        if o.category == "sink" && o.powered {
            clean.extend(scene.descendants(&o.id));
        }
    }
    for id in cool {
        let o = scene.object_mut(&id).expect("descendant exists");
        if o.coolable {
            o.cold = true;
            o.hot = false;
        }
    }
    for id in clean {
        let o = scene.object_mut(&id).expect("descendant exists");
        if o.cleanable {
            o.clean = true;
        }
    }
    if let Some(h) = scene.agent.holding.clone() {
        let agent = scene.agent.cell;
        let lit = scene
            .objects
            .iter()
            .any(|o| LAMPS.contains(&o.category.as_str()) && o.powered && chebyshev(o.cell, agent) <= INTERACTION_RANGE);
        if lit {
            scene.object_mut(&h).expect("held object exists").examined = true;
        }
    }
}

/// Execute a step against whichever instance of its label is within reach.
/// Among several, applicable instances win, then ones the agent has not
/// moved, then the nearest, then the smallest id.
pub fn execute_step(scene: &mut Scene, step: &SymbolicStep) -> Result<StepOutcome> {
    let Some(action) = step.primitive() else {
        return Err(failed(step.index, format!("unknown action `{}`", step.action.surface())));
    };
    let label = normalize_label(&step.object_label);
    let agent = scene.agent.cell;
    let holding = scene.agent.holding.clone();
    let mut candidates: Vec<_> = scene
        .objects
        .iter()
        .filter(|o| o.category == label && holding.as_deref() != Some(o.id.as_str()))
        .filter(|o| chebyshev(o.cell, agent) <= INTERACTION_RANGE)
        .map(|o| {
            let ok = check(scene, step.index, action, &o.id).is_ok();
            (!ok, o.moved, chebyshev(o.cell, agent), o.id.clone())
        })
        .collect();
    candidates.sort();
    let Some((_, _, _, id)) = candidates.into_iter().next() else {
        return Err(Error::TargetNotFound { step: step.index, label });
    };
    apply(scene, step.index, action, &id)?;
    Ok(StepOutcome { step: step.index, object_id: id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{Agent, Facing, SceneObject};

    fn kitchen() -> Scene {
        let mut counter = SceneObject::of_category("countertop_1", "countertop", (1, 0));
        counter.contains = vec!["apple_1".into(), "knife_1".into()];
        let mut cooker = SceneObject::of_category("cooker_1", "cooker", (2, 0));
        cooker.contains = vec!["pan_1".into()];
        let mut pan = SceneObject::of_category("pan_1", "pan", (2, 0));
        pan.contains = vec!["orange_1".into()];
        Scene {
            width: 4,
            walls: vec![],
            objects: vec![
                counter,
                SceneObject::of_category("apple_1", "apple", (1, 0)),
                SceneObject::of_category("knife_1", "knife", (1, 0)),
                cooker,
                pan,
                SceneObject::of_category("orange_1", "orange", (2, 0)),
                SceneObject::of_category("mug_1", "mug", (0, 0)),
                SceneObject::of_category("desk_lamp_1", "desk_lamp", (0, 1)),
            ],
            agent: Agent { cell: (1, 1), facing: Facing::Up, holding: None },
        }
    }

    fn step(action: PrimitiveAction, label: &str) -> SymbolicStep {
        SymbolicStep::new(1, action, label, None)
    }

    #[test]
    fn single_arm() {
        let mut s = kitchen();
        execute_step(&mut s, &step(PrimitiveAction::PickUp, "knife")).unwrap();
        let err = execute_step(&mut s, &step(PrimitiveAction::PickUp, "mug")).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { .. }));
    }

    #[test]
    fn slicing_keeps_knife_in_hand() {
        let mut s = kitchen();
        execute_step(&mut s, &step(PrimitiveAction::PickUp, "knife")).unwrap();
        execute_step(&mut s, &step(PrimitiveAction::Slice, "apple")).unwrap();
        assert!(s.object("apple_1").unwrap().sliced);
        assert_eq!(s.agent.holding.as_deref(), Some("knife_1"));
    }

    #[test]
    fn slicing_without_knife_fails() {
        let mut s = kitchen();
        let err = execute_step(&mut s, &step(PrimitiveAction::Slice, "apple")).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { .. }));
    }

    #[test]
    fn cooker_heats_and_switches_off() {
        let mut s = kitchen();
        execute_step(&mut s, &step(PrimitiveAction::ToggleOn, "cooker")).unwrap();
        assert!(s.object("orange_1").unwrap().hot);
        assert!(!s.object("cooker_1").unwrap().powered);
    }

    #[test]
    fn put_moves_contents_along() {
        let mut s = kitchen();
        execute_step(&mut s, &step(PrimitiveAction::PickUp, "pan")).unwrap();
        assert_eq!(s.object("orange_1").unwrap().cell, (1, 1));
        execute_step(&mut s, &step(PrimitiveAction::Put, "countertop")).unwrap();
        assert_eq!(s.object("orange_1").unwrap().cell, (1, 0));
        assert!(s.object("pan_1").unwrap().moved);
        s.validate().unwrap();
    }

    #[test]
    fn lamp_examines_held_object() {
        let mut s = kitchen();
        execute_step(&mut s, &step(PrimitiveAction::PickUp, "mug")).unwrap();
        execute_step(&mut s, &step(PrimitiveAction::ToggleOn, "desk_lamp")).unwrap();
        assert!(s.object("mug_1").unwrap().examined);
    }

    #[test]
    fn out_of_reach_is_not_found() {
        let mut s = kitchen();
        s.agent.cell = (3, 3);
        let err = execute_step(&mut s, &step(PrimitiveAction::PickUp, "apple")).unwrap_err();
        assert!(matches!(err, Error::TargetNotFound { .. }));
    }

    #[test]
    fn closed_fridge_cools() {
        let mut s = kitchen();
        s.objects.push(SceneObject::of_category("fridge_1", "fridge", (2, 2)));
        execute_step(&mut s, &step(PrimitiveAction::PickUp, "apple")).unwrap();
        let err = execute_step(&mut s, &step(PrimitiveAction::Put, "fridge")).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { .. }));
        execute_step(&mut s, &step(PrimitiveAction::Open, "fridge")).unwrap();
        execute_step(&mut s, &step(PrimitiveAction::Put, "fridge")).unwrap();
        assert!(!s.object("apple_1").unwrap().cold);
        execute_step(&mut s, &step(PrimitiveAction::Close, "fridge")).unwrap();
        assert!(s.object("apple_1").unwrap().cold);
    }
}
