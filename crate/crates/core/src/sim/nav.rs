use std::collections::VecDeque;

use super::scene::{chebyshev, Cell, Facing, Scene};
use crate::error::{Error, Result};
use crate::localization::GridGoal;

/// Expansion order for breadth-first search: up, right, down, left.
const MOVES: [(i64, i64, Facing); 4] =
    [(0, -1, Facing::Up), (1, 0, Facing::Right), (0, 1, Facing::Down), (-1, 0, Facing::Left)];

/// Cells from which `goal` is within interaction range.
pub fn approach_cells(width: usize, blocked: &[bool], goal: Cell) -> Vec<Cell> {
    let mut out = Vec::new();
    for y in goal.1.saturating_sub(1)..=(goal.1 + 1).min(width - 1) {
        for x in goal.0.saturating_sub(1)..=(goal.0 + 1).min(width - 1) {
            if !blocked[y * width + x] {
                out.push((x, y));
            }
        }
    }
    out
}

/// Shortest 4-connected path from `start` to any cell in `targets`,
/// excluding `start`. `None` when no target is reachable.
pub fn shortest_path(width: usize, blocked: &[bool], start: Cell, targets: &[Cell]) -> Option<Vec<Cell>> {
    let mut is_target = vec![false; width * width];
    for &(x, y) in targets {
        is_target[y * width + x] = true;
    }
    let idx = |c: Cell| c.1 * width + c.0;
    if is_target[idx(start)] {
        return Some(Vec::new());
    }
    let mut prev = vec![usize::MAX; width * width];
    let mut queue = VecDeque::from([start]);
    prev[idx(start)] = idx(start);
    while let Some(cur) = queue.pop_front() {
        for (dx, dy, _) in MOVES {
            let (nx, ny) = (cur.0 as i64 + dx, cur.1 as i64 + dy);
            if nx < 0 || ny < 0 || nx >= width as i64 || ny >= width as i64 {
                continue;
            }
            let next = (nx as usize, ny as usize);
            let i = idx(next);
            if blocked[i] || prev[i] != usize::MAX {
                continue;
            }
            prev[i] = idx(cur);
            if is_target[i] {
                let mut path = vec![next];
                let mut j = prev[i];
                while j != idx(start) {
                    path.push((j % width, j / width));
                    j = prev[j];
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(next);
        }
    }
    None
}

fn facing_between(a: Cell, b: Cell) -> Facing {
    MOVES
        .iter()
        .find(|(dx, dy, _)| a.0 as i64 + dx == b.0 as i64 && a.1 as i64 + dy == b.1 as i64)
        .map(|m| m.2)
        .unwrap_or_default()
}

/// Walk the agent to the nearest cell within reach of `goal`. Returns the
/// cells visited, not counting the start.
pub fn navigate(scene: &mut Scene, goal: GridGoal) -> Result<Vec<Cell>> {
    let w = scene.width;
    if goal.x >= w || goal.y >= w {
        return Err(Error::Unreachable { x: goal.x, y: goal.y });
    }
    let blocked = scene.blocked_grid();
    let start = scene.agent.cell;
    let targets = approach_cells(w, &blocked, (goal.x, goal.y));
    let path = shortest_path(w, &blocked, start, &targets).ok_or(Error::Unreachable { x: goal.x, y: goal.y })?;
    if let Some(&last) = path.last() {
        let before = if path.len() >= 2 { path[path.len() - 2] } else { start };
        scene.agent.facing = facing_between(before, last);
        scene.agent.cell = last;
        if let Some(h) = scene.agent.holding.clone() {
            scene.relocate(&h, last);
        }
    }
    debug_assert!(chebyshev(scene.agent.cell, (goal.x, goal.y)) <= 1 || path.is_empty());
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::Agent;

    fn empty(width: usize, walls: Vec<Cell>, agent: Cell) -> Scene {
        Scene { width, walls, objects: Vec::new(), agent: Agent { cell: agent, facing: Facing::Up, holding: None } }
    }

    #[test]
    fn adjacent_goal_needs_no_moves() {
        let mut s = empty(5, vec![], (2, 2));
        assert!(navigate(&mut s, GridGoal::new(3, 3)).unwrap().is_empty());
    }

    #[test]
    fn corridor() {
        let mut walls = Vec::new();
        for x in 0..9 {
            walls.push((x, 0));
            walls.push((x, 2));
        }
        let mut s = empty(9, walls, (0, 1));
        let path = navigate(&mut s, GridGoal::new(6, 1)).unwrap();
        assert_eq!(path.len(), 5);
        assert_eq!(s.agent.cell, (5, 1));
        assert_eq!(s.agent.facing, Facing::Right);
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let walls = vec![(3, 0), (3, 1), (3, 2), (3, 3), (3, 4)];
        let mut s = empty(5, walls, (0, 0));
        assert!(matches!(navigate(&mut s, GridGoal::new(4, 4)), Err(Error::Unreachable { x: 4, y: 4 })));
    }
}
