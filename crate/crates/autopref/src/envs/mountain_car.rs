//! Mountain Car Collection: a 1-D terrain of 20 positions with 5 energy
//! levels and 3 collectible items. Movement costs energy (more uphill, more
//! at obstacle positions); the rest action recovers one level. The task is
//! to collect the power cell, sensor array, and data crystal in order and
//! then return to the base station at position 0.

use super::{ActionId, EnvStateId};

pub const POSITIONS: usize = 20;
pub const ENERGY_LEVELS: usize = 5;

/// Terrain heights per position; adjacent positions differ by at most 1.
pub const HEIGHTS: [i32; POSITIONS] =
    [0, 0, 1, 2, 2, 3, 3, 2, 1, 1, 2, 3, 3, 2, 1, 2, 2, 1, 0, 0];

/// Crossing onto these positions costs one extra energy level.
pub const OBSTACLES: [usize; 3] = [5, 10, 15];

/// Collectible items: `(event, position)` in required order.
pub const ITEMS: [(&str, usize); 3] = [("power", 6), ("sensor", 11), ("crystal", 16)];
pub const BASE_EVENT: &str = "base";
pub const BASE_POSITION: usize = 0;
pub const START_POSITION: usize = 9;

const INVENTORY_STATES: usize = 1 << ITEMS.len();

#[derive(Debug, Clone)]
pub struct MountainCarEnv {
    pub name: String,
    pub max_steps: usize,
}

pub const ACTIONS: [&str; 3] = ["left", "right", "rest"];

impl MountainCarEnv {
    pub fn num_states(&self) -> usize {
        POSITIONS * ENERGY_LEVELS * INVENTORY_STATES
    }

    pub fn encode(&self, pos: usize, energy: usize, items: usize) -> EnvStateId {
        (pos * ENERGY_LEVELS + energy) * INVENTORY_STATES + items
    }

    pub fn decode(&self, s: EnvStateId) -> (usize, usize, usize) {
        (
            s / (ENERGY_LEVELS * INVENTORY_STATES),
            (s / INVENTORY_STATES) % ENERGY_LEVELS,
            s % INVENTORY_STATES,
        )
    }

    pub fn initial(&self) -> EnvStateId {
        self.encode(START_POSITION, ENERGY_LEVELS - 1, 0)
    }

    /// Energy cost of moving from `from` to the adjacent `to`.
    pub fn move_cost(from: usize, to: usize) -> usize {
        let climb = (HEIGHTS[to] - HEIGHTS[from]).max(0) as usize;
        1 + climb + usize::from(OBSTACLES.contains(&to))
    }

    pub fn step(&self, s: EnvStateId, a: ActionId) -> EnvStateId {
        let (pos, energy, mut items) = self.decode(s);
        match ACTIONS[a] {
            "rest" => self.encode(pos, (energy + 1).min(ENERGY_LEVELS - 1), items),
            dir => {
                let target = match dir {
                    "left" if pos > 0 => pos - 1,
                    "right" if pos + 1 < POSITIONS => pos + 1,
                    _ => return s,
                };
                let cost = Self::move_cost(pos, target);
                if cost > energy {
                    return s;
                }
                if let Some(k) = ITEMS.iter().position(|&(_, p)| p == target) {
                    items |= 1 << k;
                }
                self.encode(target, energy - cost, items)
            }
        }
    }

    pub fn label(&self, s: EnvStateId) -> Option<&str> {
        let (pos, _, items) = self.decode(s);
        if let Some(k) = ITEMS.iter().position(|&(_, p)| p == pos) {
            if items & (1 << k) != 0 {
                return Some(ITEMS[k].0);
            }
        }
        if pos == BASE_POSITION {
            return Some(BASE_EVENT);
        }
        None
    }

    pub fn position(&self, s: EnvStateId) -> (i32, i32) {
        (self.decode(s).0 as i32, 0)
    }

    pub fn event_cells(&self, event: &str) -> Vec<(i32, i32)> {
        if event == BASE_EVENT {
            return vec![(BASE_POSITION as i32, 0)];
        }
        ITEMS
            .iter()
            .filter(|(e, _)| *e == event)
            .map(|&(_, p)| (p as i32, 0))
            .collect()
    }

    pub fn event_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ITEMS.iter().map(|(e, _)| e.to_string()).collect();
        names.push(BASE_EVENT.to_string());
        names
    }

    pub fn subgoal_order(&self) -> Vec<String> {
        self.event_names()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> MountainCarEnv {
        MountainCarEnv { name: "mountain_car".to_string(), max_steps: 300 }
    }

    #[test]
    fn terrain_is_navigable_at_full_energy() {
        for p in 0..POSITIONS - 1 {
            assert!(MountainCarEnv::move_cost(p, p + 1) <= ENERGY_LEVELS - 1, "pos {p}");
            assert!(MountainCarEnv::move_cost(p + 1, p) <= ENERGY_LEVELS - 1, "pos {p}");
        }
    }

    #[test]
    fn moves_spend_energy_and_rest_recovers() {
        let e = env();
        let s = e.initial(); // position 9, full energy
        let right = e.step(s, 1); // 9 -> 10: climb 1, obstacle -> cost 3
        let (pos, energy, _) = e.decode(right);
        assert_eq!((pos, energy), (10, 1));
        // Moving up to 11 costs 2 > 1: no-op.
        assert_eq!(e.step(right, 1), right);
        let rested = e.step(right, 2);
        assert_eq!(e.decode(rested).1, 2);
        // Resting at full energy changes nothing.
        let full = e.encode(3, ENERGY_LEVELS - 1, 0);
        assert_eq!(e.step(full, 2), full);
    }

    #[test]
    fn items_are_picked_up_on_arrival_and_label_afterwards() {
        let e = env();
        let at_sensor_empty = e.encode(11, 3, 0);
        assert_eq!(e.label(at_sensor_empty), None);
        let before = e.encode(10, 4, 0);
        let arrived = e.step(before, 1);
        let (pos, _, items) = e.decode(arrived);
        assert_eq!(pos, 11);
        assert_eq!(items, 0b010);
        assert_eq!(e.label(arrived), Some("sensor"));
        assert_eq!(e.label(e.encode(BASE_POSITION, 0, 0)), Some("base"));
    }
}
