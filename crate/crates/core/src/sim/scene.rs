use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid cell as `(x, y)`; serialized as a two-element array.
pub type Cell = (usize, usize);

pub fn chebyshev(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facing {
    #[default]
    Up,
    Right,
    Down,
    Left,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub cell: Cell,
    #[serde(default)]
    pub pickupable: bool,
    #[serde(default)]
    pub receptacle: bool,
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub togglable: bool,
    #[serde(default)]
    pub powered: bool,
    #[serde(default)]
    pub sliceable: bool,
    #[serde(default)]
    pub sliced: bool,
    #[serde(default)]
    pub heatable: bool,
    #[serde(default)]
    pub hot: bool,
    #[serde(default)]
    pub coolable: bool,
    #[serde(default)]
    pub cold: bool,
    #[serde(default)]
    pub cleanable: bool,
    #[serde(default)]
    pub clean: bool,
    /// Set once the agent has put the object somewhere.
    #[serde(default)]
    pub moved: bool,
    /// Set once the object was held next to a switched-on lamp.
    #[serde(default)]
    pub examined: bool,
    #[serde(default)]
    pub contains: Vec<String>,
}

impl SceneObject {
    /// Non-pickupable objects are fixtures: they block movement.
    pub fn is_fixture(&self) -> bool {
        !self.pickupable
    }

    /// Object with the default properties of its category.
    pub fn of_category(id: &str, category: &str, cell: Cell) -> Self {
        let mut o = SceneObject { id: id.into(), category: category.into(), cell, ..Default::default() };
        let is = |set: &[&str]| set.contains(&category);
        o.pickupable = !is(FIXTURES);
        o.receptacle = is(RECEPTACLE_FIXTURES) || is(CONTAINERS);
        o.openable = is(&["fridge", "microwave", "cabinet", "drawer"]);
        o.togglable = is(&["microwave", "stove_burner", "cooker", "sink", "desk_lamp", "floor_lamp", "coffee_machine", "toaster"]);
        o.sliceable = is(SLICEABLE);
        o.heatable = is(HEATABLE);
        o.coolable = is(COOLABLE);
        o.cleanable = is(CLEANABLE);
        o
    }
}

pub const FIXTURES: &[&str] = &[
    "countertop", "dining_table", "side_table", "coffee_table", "shelf", "desk", "sofa", "bed", "dresser",
    "cabinet", "drawer", "fridge", "microwave", "stove_burner", "cooker", "sink", "coffee_machine", "desk_lamp",
    "floor_lamp", "garbage_can", "toaster",
];
pub const RECEPTACLE_FIXTURES: &[&str] = &[
    "countertop", "dining_table", "side_table", "coffee_table", "shelf", "desk", "sofa", "bed", "dresser",
    "cabinet", "drawer", "fridge", "microwave", "stove_burner", "cooker", "sink", "coffee_machine", "garbage_can",
    "toaster",
];
/// Pickupable objects that can hold others.
pub const CONTAINERS: &[&str] = &["bowl", "plate", "pan", "pot", "mug", "cup"];
pub const SLICEABLE: &[&str] = &["apple", "tomato", "potato", "bread", "lettuce"];
pub const HEATABLE: &[&str] = &["apple", "tomato", "potato", "bread", "egg", "mug", "cup", "bowl", "plate", "lemon", "orange"];
pub const COOLABLE: &[&str] = &["apple", "tomato", "potato", "bread", "egg", "lettuce", "mug", "cup", "bowl", "plate", "pan", "pot"];
pub const CLEANABLE: &[&str] = &[
    "apple", "tomato", "potato", "lettuce", "mug", "cup", "bowl", "plate", "pan", "pot", "knife", "spoon", "fork",
    "spatula", "ladle", "cloth",
];
pub const HEATERS: &[&str] = &["microwave", "stove_burner", "cooker"];
pub const LAMPS: &[&str] = &["desk_lamp", "floor_lamp"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub cell: Cell,
    #[serde(default)]
    pub facing: Facing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    #[serde(default)]
    pub walls: Vec<Cell>,
    pub objects: Vec<SceneObject>,
    pub agent: Agent,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::read_text(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_text(path, &(self.to_json() + "\n"))
    }

    /// Check every structural invariant, reporting the first violation with
    /// a JSON-style path.
    pub fn validate(&self) -> Result<()> {
        let w = self.width;
        if w == 0 {
            return Err(schema("$.width", "must be positive"));
        }
        let in_bounds = |c: Cell| c.0 < w && c.1 < w;
        let walls: BTreeSet<Cell> = self.walls.iter().copied().collect();
        for (i, c) in self.walls.iter().enumerate() {
            if !in_bounds(*c) {
                return Err(schema(format!("$.walls[{i}]"), "outside the grid"));
            }
        }
        let mut ids = BTreeMap::new();
        for (i, o) in self.objects.iter().enumerate() {
            let p = format!("$.objects[{i}]");
            if o.id.is_empty() {
                return Err(schema(format!("{p}.id"), "empty id"));
            }
            if ids.insert(o.id.as_str(), i).is_some() {
                return Err(schema(format!("{p}.id"), format!("duplicate id `{}`", o.id)));
            }
            if !in_bounds(o.cell) {
                return Err(schema(format!("{p}.cell"), "outside the grid"));
            }
            if walls.contains(&o.cell) {
                return Err(schema(format!("{p}.cell"), "object on a wall cell"));
            }
        }
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, o) in self.objects.iter().enumerate() {
            for (j, child) in o.contains.iter().enumerate() {
                let p = format!("$.objects[{i}].contains[{j}]");
                let Some(&ci) = ids.get(child.as_str()) else {
                    return Err(schema(p, format!("unknown object `{child}`")));
                };
                if !o.receptacle {
                    return Err(schema(p, format!("`{}` is not a receptacle", o.id)));
                }
                if parent.insert(child.as_str(), o.id.as_str()).is_some() {
                    return Err(schema(p, format!("`{child}` has two containers")));
                }
                if self.objects[ci].cell != o.cell {
                    return Err(schema(p, format!("`{child}` is not in its container's cell")));
                }
            }
        }
        for o in &self.objects {
            let mut seen = BTreeSet::new();
            let mut cur = o.id.as_str();
            while let Some(&p) = parent.get(cur) {
                if !seen.insert(cur) || p == o.id {
                    return Err(schema("$.objects", format!("containment cycle through `{}`", o.id)));
                }
                cur = p;
            }
        }
        let a = self.agent.cell;
        if !in_bounds(a) {
            return Err(schema("$.agent.cell", "outside the grid"));
        }
        if walls.contains(&a) || self.objects.iter().any(|o| o.is_fixture() && o.cell == a) {
            return Err(schema("$.agent.cell", "agent must stand on a free cell"));
        }
        if let Some(h) = &self.agent.holding {
            let Some(&hi) = ids.get(h.as_str()) else {
                return Err(schema("$.agent.holding", format!("unknown object `{h}`")));
            };
            if parent.contains_key(h.as_str()) {
                return Err(schema("$.agent.holding", format!("`{h}` is inside a container")));
            }
            if !self.objects[hi].pickupable {
                return Err(schema("$.agent.holding", format!("`{h}` cannot be held")));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn parent_of(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.contains.iter().any(|c| c == id))
    }

    /// Containers of `id`, innermost first.
    pub fn ancestors(&self, id: &str) -> Vec<&SceneObject> {
        let mut out = Vec::new();
        let mut cur = id.to_string();
        while let Some(p) = self.parent_of(&cur) {
            out.push(p);
            cur = p.id.clone();
        }
        out
    }

    /// Everything nested inside `id`, in depth-first order.
    pub fn descendants(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack: Vec<String> = self.object(id).map(|o| o.contains.iter().rev().cloned().collect()).unwrap_or_default();
        while let Some(c) = stack.pop() {
            if let Some(o) = self.object(&c) {
                stack.extend(o.contains.iter().rev().cloned());
            }
            out.push(c);
        }
        out
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls.contains(&c)
    }

    /// Cells that block movement: walls and fixtures.
    pub fn blocked_grid(&self) -> Vec<bool> {
        let w = self.width;
        let mut grid = vec![false; w * w];
        for &(x, y) in &self.walls {
            grid[y * w + x] = true;
        }
        for o in self.objects.iter().filter(|o| o.is_fixture()) {
            grid[o.cell.1 * w + o.cell.0] = true;
        }
        grid
    }

    /// Move an object (and everything inside it) to `cell`.
    pub(crate) fn relocate(&mut self, id: &str, cell: Cell) {
        let mut ids = self.descendants(id);
        ids.push(id.to_string());
        for o in self.objects.iter_mut().filter(|o| ids.contains(&o.id)) {
            o.cell = cell;
        }
    }

    pub(crate) fn detach(&mut self, id: &str) {
        for o in &mut self.objects {
            o.contains.retain(|c| c != id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Scene {
        Scene {
            width: 4,
            walls: vec![(0, 0)],
            objects: vec![SceneObject::of_category("apple_1", "apple", (2, 2))],
            agent: Agent { cell: (1, 1), facing: Facing::Up, holding: None },
        }
    }

    #[test]
    fn minimal_scene_loads() {
        let s = Scene::from_json(&minimal().to_json()).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s, minimal());
    }

    #[test]
    fn object_on_wall_rejected() {
        let mut s = minimal();
        s.objects[0].cell = (0, 0);
        match Scene::from_json(&s.to_json()) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "$.objects[0].cell"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn containment_must_be_a_forest() {
        let mut s = minimal();
        let mut bowl = SceneObject::of_category("bowl_1", "bowl", (2, 2));
        bowl.contains.push("apple_1".into());
        let mut plate = SceneObject::of_category("plate_1", "plate", (2, 2));
        plate.contains.push("apple_1".into());
        s.objects.extend([bowl, plate]);
        assert!(matches!(s.validate(), Err(Error::Schema { .. })));
    }

    #[test]
    fn unknown_fields_and_bad_json_are_schema_errors() {
        assert!(matches!(Scene::from_json("{\"width\": 3}"), Err(Error::Schema { .. })));
    }

    #[test]
    fn catalog_flags() {
        let f = SceneObject::of_category("f", "fridge", (0, 0));
        assert!(f.is_fixture() && f.openable && f.receptacle);
        let k = SceneObject::of_category("k", "knife", (0, 0));
        assert!(k.pickupable && !k.receptacle && k.cleanable);
        let lamp = SceneObject::of_category("l", "desk_lamp", (0, 0));
        assert!(lamp.togglable && !lamp.receptacle);
    }
}
