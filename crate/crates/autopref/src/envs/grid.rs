//! Gridworld environments: plain position-state grids and the Blind
//! Craftsman variant whose state folds in a wood/tool inventory.

use super::layout::GridLayout;
use super::{ActionId, EnvStateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub fn delta(self) -> (i32, i32) {
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Left => "left",
            GridAction::Right => "right",
        }
    }
}

pub const FOUR_WAY: [GridAction; 4] =
    [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

/// A deterministic gridworld whose state is the agent's cell. Labels are
/// positional: a labeled cell emits its event on every arrival. Task
/// progress (which subgoals are done) lives in the paired DFA state, not
/// here.
#[derive(Debug, Clone)]
pub struct GridEnv {
    pub name: String,
    pub layout: GridLayout,
    pub actions: Vec<GridAction>,
    pub subgoal_order: Option<Vec<String>>,
    pub max_steps: usize,
}

impl GridEnv {
    pub fn num_states(&self) -> usize {
        self.layout.num_cells()
    }

    pub fn initial(&self) -> EnvStateId {
        self.layout.start()
    }

    pub fn step(&self, s: EnvStateId, a: ActionId) -> EnvStateId {
        let (x, y) = self.layout.xy(s);
        let (dx, dy) = self.actions[a].delta();
        match self.layout.cell(x + dx, y + dy) {
            Some(n) if !self.layout.is_blocked(n) => n,
            _ => s,
        }
    }

    pub fn label(&self, s: EnvStateId) -> Option<&str> {
        self.layout.event_at(s)
    }

    pub fn position(&self, s: EnvStateId) -> (i32, i32) {
        self.layout.xy(s)
    }
}

/// Inventory bounds for the Blind Craftsman.
pub const MAX_WOOD: usize = 2;
pub const MAX_TOOLS: usize = 3;
const WOOD_LEVELS: usize = MAX_WOOD + 1;
const TOOL_LEVELS: usize = MAX_TOOLS + 1;

/// Blind Craftsman: collect wood (capacity 2), craft tools at the factory
/// (one wood each, three total), then return home. The environment state is
/// `(cell, wood, tools)` so the product MDP stays finite and exact.
///
/// Layout letters: `w` wood sources, `f` the factory, `h` home. Crafting the
/// k-th tool emits `toolk`, so the emitted event is a pure function of the
/// state and the DFA can track tool count without counting wood.
#[derive(Debug, Clone)]
pub struct CraftsmanEnv {
    pub name: String,
    pub layout: GridLayout,
    pub max_steps: usize,
}

pub const TOOL_EVENTS: [&str; MAX_TOOLS] = ["tool1", "tool2", "tool3"];

impl CraftsmanEnv {
    pub fn num_states(&self) -> usize {
        self.layout.num_cells() * WOOD_LEVELS * TOOL_LEVELS
    }

    pub fn encode(&self, cell: usize, wood: usize, tools: usize) -> EnvStateId {
        (cell * WOOD_LEVELS + wood) * TOOL_LEVELS + tools
    }

    pub fn decode(&self, s: EnvStateId) -> (usize, usize, usize) {
        (s / (WOOD_LEVELS * TOOL_LEVELS), (s / TOOL_LEVELS) % WOOD_LEVELS, s % TOOL_LEVELS)
    }

    pub fn initial(&self) -> EnvStateId {
        self.encode(self.layout.start(), 0, 0)
    }

    pub fn step(&self, s: EnvStateId, a: ActionId) -> EnvStateId {
        let (cell, mut wood, mut tools) = self.decode(s);
        let (x, y) = self.layout.xy(cell);
        let (dx, dy) = FOUR_WAY[a].delta();
        let cell = match self.layout.cell(x + dx, y + dy) {
            Some(n) if !self.layout.is_blocked(n) => n,
            _ => cell,
        };
        match self.layout.event_at(cell) {
            Some("wood") if wood < MAX_WOOD => wood += 1,
            Some("factory") if wood >= 1 && tools < MAX_TOOLS => {
                wood -= 1;
                tools += 1;
            }
            _ => {}
        }
        self.encode(cell, wood, tools)
    }

    pub fn label(&self, s: EnvStateId) -> Option<&str> {
        let (cell, wood, tools) = self.decode(s);
        match self.layout.event_at(cell) {
            Some("wood") if wood >= 1 => Some("wood"),
            Some("factory") if tools >= 1 => Some(TOOL_EVENTS[tools - 1]),
            Some("home") if tools == MAX_TOOLS => Some("home"),
            _ => None,
        }
    }

    pub fn position(&self, s: EnvStateId) -> (i32, i32) {
        self.layout.xy(self.decode(s).0)
    }

    /// Cells that can emit `event`: tool events map to the factory.
    pub fn event_cells(&self, event: &str) -> Vec<usize> {
        if TOOL_EVENTS.contains(&event) {
            self.layout.event_cells("factory")
        } else {
            self.layout.event_cells(event)
        }
    }

    pub fn event_names(&self) -> Vec<String> {
        let mut names = vec!["wood".to_string()];
        names.extend(TOOL_EVENTS.iter().map(|s| s.to_string()));
        names.push("home".to_string());
        names
    }
}
