//! Finite labeled environments and their composition with a DFA.
//!
//! An [`Env`] is a finite deterministic environment whose states carry event
//! labels; paired with a [`Dfa`] through [`Product`] it forms the product
//! MDP on which everything else in this crate operates. Events are emitted
//! on state *change*: a step that leaves the environment state untouched
//! emits the null event, so a labeled cell fires once per arrival rather
//! than continuously.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automaton::{parse_dfa, Dfa, DfaStateId, EventId, NULL_EVENT};

pub mod grid;
pub mod layout;
pub mod mountain_car;

pub use grid::{CraftsmanEnv, GridAction, GridEnv, FOUR_WAY};
pub use layout::GridLayout;
pub use mountain_car::MountainCarEnv;

/// Index of an environment state in its enumerable state space.
pub type EnvStateId = usize;
/// Index of an action in the environment's ordered action set.
pub type ActionId = usize;

/// The seeded RNG used throughout the crate; fixed so that runs are
/// reproducible bit-for-bit across platforms.
pub type Prng = ChaCha8Rng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("layout line {line}: {msg}")]
    Layout { line: usize, msg: String },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("target size {size} is smaller than the base grid ({base})")]
    ScaleTooSmall { size: usize, base: usize },
    #[error("`{0}` is not a gridworld and cannot be scaled")]
    NotAGridworld(String),
    #[error("trajectory enumeration exceeded the guard of {max}")]
    EnumerationOverflow { max: usize },
    #[error("environment emits `{event}` which is not in the DFA alphabet")]
    UnknownLabel { event: String },
}

/// A bundled environment. The set is closed: every variant has a finite,
/// enumerable state space and deterministic dynamics (the RNG parameter in
/// [`Env::step`] exists so stochastic variants would not change the API).
#[derive(Debug, Clone)]
pub enum Env {
    Grid(GridEnv),
    Craftsman(CraftsmanEnv),
    MountainCar(MountainCarEnv),
}

impl Env {
    pub fn name(&self) -> &str {
        match self {
            Env::Grid(e) => &e.name,
            Env::Craftsman(e) => &e.name,
            Env::MountainCar(e) => &e.name,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Env::Grid(e) => e.num_states(),
            Env::Craftsman(e) => e.num_states(),
            Env::MountainCar(e) => e.num_states(),
        }
    }

    pub fn initial(&self) -> EnvStateId {
        match self {
            Env::Grid(e) => e.initial(),
            Env::Craftsman(e) => e.initial(),
            Env::MountainCar(e) => e.initial(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Env::Grid(e) => e.actions.len(),
            Env::Craftsman(_) => 4,
            Env::MountainCar(_) => mountain_car::ACTIONS.len(),
        }
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        match self {
            Env::Grid(e) => e.actions[a].name(),
            Env::Craftsman(_) => grid::FOUR_WAY[a].name(),
            Env::MountainCar(_) => mountain_car::ACTIONS[a],
        }
    }

    /// Deterministic transition; invalid moves are no-ops. The RNG is
    /// reserved for stochastic variants.
    pub fn step(&self, s: EnvStateId, a: ActionId, _rng: &mut Prng) -> EnvStateId {
        match self {
            Env::Grid(e) => e.step(s, a),
            Env::Craftsman(e) => e.step(s, a),
            Env::MountainCar(e) => e.step(s, a),
        }
    }

    /// Event name labeling a state, or `None` for the null label.
    pub fn label(&self, s: EnvStateId) -> Option<&str> {
        match self {
            Env::Grid(e) => e.label(s),
            Env::Craftsman(e) => e.label(s),
            Env::MountainCar(e) => e.label(s),
        }
    }

    /// Grid coordinate of a state (1-D environments use `y = 0`).
    pub fn position(&self, s: EnvStateId) -> (i32, i32) {
        match self {
            Env::Grid(e) => e.position(s),
            Env::Craftsman(e) => e.position(s),
            Env::MountainCar(e) => e.position(s),
        }
    }

    /// Coordinates of the cells that can emit `event`.
    pub fn event_positions(&self, event: &str) -> Vec<(i32, i32)> {
        match self {
            Env::Grid(e) => {
                e.layout.event_cells(event).iter().map(|&c| e.layout.xy(c)).collect()
            }
            Env::Craftsman(e) => {
                e.event_cells(event).iter().map(|&c| e.layout.xy(c)).collect()
            }
            Env::MountainCar(e) => e.event_cells(event),
        }
    }

    /// The required subgoal sequence, for environments with a linear task.
    pub fn subgoal_order(&self) -> Option<Vec<String>> {
        match self {
            Env::Grid(e) => e.subgoal_order.clone(),
            Env::Craftsman(_) => {
                let mut order: Vec<String> =
                    grid::TOOL_EVENTS.iter().map(|s| s.to_string()).collect();
                order.push("home".to_string());
                Some(order)
            }
            Env::MountainCar(e) => Some(e.subgoal_order()),
        }
    }

    /// Episode horizon.
    pub fn max_steps(&self) -> usize {
        match self {
            Env::Grid(e) => e.max_steps,
            Env::Craftsman(e) => e.max_steps,
            Env::MountainCar(e) => e.max_steps,
        }
    }

    /// Maximum Manhattan distance between two states' positions.
    pub fn diameter(&self) -> i32 {
        match self {
            Env::Grid(e) => e.layout.diameter(),
            Env::Craftsman(e) => e.layout.diameter(),
            Env::MountainCar(_) => mountain_car::POSITIONS as i32 - 1,
        }
    }

    pub fn is_gridworld(&self) -> bool {
        !matches!(self, Env::MountainCar(_))
    }
}

/// Environment construction parameters. Fields default to the bundled
/// values.
#[derive(Debug, Clone, Default)]
pub struct EnvParams {
    /// Episode horizon override.
    pub horizon: Option<usize>,
}

const BUNDLED: [(&str, &str, &str); 5] = [
    ("iron_sword", include_str!("../../data/maps/iron_sword.map"), include_str!("../../data/dfa/iron_sword.dfa")),
    ("dungeon_quest", include_str!("../../data/maps/dungeon_quest.map"), include_str!("../../data/dfa/dungeon_quest.dfa")),
    ("blind_craftsman", include_str!("../../data/maps/blind_craftsman.map"), include_str!("../../data/dfa/blind_craftsman.dfa")),
    ("building_bridge", include_str!("../../data/maps/building_bridge.map"), include_str!("../../data/dfa/building_bridge.dfa")),
    ("mountain_car", "", include_str!("../../data/dfa/mountain_car.dfa")),
];

const CHAIN3_MAP: &str = include_str!("../../data/maps/chain3.map");
const CHAIN3_DFA: &str = include_str!("../../data/dfa/chain3.dfa");

/// Names accepted by [`make_env`].
pub fn env_names() -> Vec<&'static str> {
    let mut names: Vec<&str> = BUNDLED.iter().map(|(n, _, _)| *n).collect();
    names.push("chain3");
    names
}

/// Builds a bundled environment by name.
pub fn make_env(name: &str, params: &EnvParams) -> Result<Env, EnvError> {
    if params.horizon == Some(0) {
        return Err(EnvError::ZeroHorizon);
    }
    let horizon = |default: usize| params.horizon.unwrap_or(default);
    let env = match name {
        "chain3" => Env::Grid(GridEnv {
            name: "chain3".to_string(),
            layout: GridLayout::parse(CHAIN3_MAP).expect("bundled layout parses"),
            actions: vec![GridAction::Left, GridAction::Right],
            subgoal_order: Some(vec!["a".to_string(), "g".to_string()]),
            max_steps: horizon(200),
        }),
        "iron_sword" => Env::Grid(GridEnv {
            name: "iron_sword".to_string(),
            layout: bundled_layout("iron_sword"),
            actions: FOUR_WAY.to_vec(),
            subgoal_order: Some(
                ["wood", "stone", "iron", "table"].iter().map(|s| s.to_string()).collect(),
            ),
            max_steps: horizon(200),
        }),
        "dungeon_quest" => Env::Grid(GridEnv {
            name: "dungeon_quest".to_string(),
            layout: bundled_layout("dungeon_quest"),
            actions: FOUR_WAY.to_vec(),
            subgoal_order: Some(
                ["key", "chest", "shield", "dragon"].iter().map(|s| s.to_string()).collect(),
            ),
            max_steps: horizon(200),
        }),
        "blind_craftsman" => Env::Craftsman(CraftsmanEnv {
            name: "blind_craftsman".to_string(),
            layout: bundled_layout("blind_craftsman"),
            max_steps: horizon(200),
        }),
        "building_bridge" => Env::Grid(GridEnv {
            name: "building_bridge".to_string(),
            layout: bundled_layout("building_bridge"),
            actions: FOUR_WAY.to_vec(),
            subgoal_order: None,
            max_steps: horizon(200),
        }),
        "mountain_car" => Env::MountainCar(MountainCarEnv {
            name: "mountain_car".to_string(),
            max_steps: horizon(300),
        }),
        other => return Err(EnvError::UnknownEnv(other.to_string())),
    };
    Ok(env)
}

fn bundled_layout(name: &str) -> GridLayout {
    let text = BUNDLED.iter().find(|(n, _, _)| *n == name).expect("bundled name").1;
    GridLayout::parse(text).expect("bundled layout parses")
}

/// Parses the bundled DFA paired with an environment name.
pub fn bundled_dfa(name: &str) -> Result<Dfa, EnvError> {
    let text = if name == "chain3" {
        CHAIN3_DFA
    } else {
        BUNDLED
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| EnvError::UnknownEnv(name.to_string()))?
            .2
    };
    Ok(parse_dfa(text).expect("bundled DFA parses"))
}

/// Produces an enlarged student variant of a gridworld: same event set and
/// task structure, a `size`x`size` grid with repositioned subgoals and
/// obstacles drawn deterministically from `obstacle_seed`. Passing the
/// original size returns the environment unchanged.
pub fn build_student_variant(env: &Env, size: usize, obstacle_seed: u64) -> Result<Env, EnvError> {
    match grid_size(env) {
        None => return Err(EnvError::NotAGridworld(env.name().to_string())),
        Some(base) if size < base => {
            return Err(EnvError::ScaleTooSmall { size, base });
        }
        // Identity passthrough keeps the original name and horizon.
        Some(base) if size == base => return Ok(env.clone()),
        Some(_) => {}
    }
    Ok(match env {
        Env::Grid(e) => Env::Grid(GridEnv {
            name: format!("{}_student{size}", e.name),
            layout: e.layout.scaled(size, obstacle_seed)?,
            actions: e.actions.clone(),
            subgoal_order: e.subgoal_order.clone(),
            max_steps: e.max_steps.max(500),
        }),
        Env::Craftsman(e) => Env::Craftsman(CraftsmanEnv {
            name: format!("{}_student{size}", e.name),
            layout: e.layout.scaled(size, obstacle_seed)?,
            max_steps: e.max_steps.max(500),
        }),
        Env::MountainCar(_) => unreachable!("handled above"),
    })
}

fn grid_size(env: &Env) -> Option<usize> {
    match env {
        Env::Grid(e) => Some(e.layout.width.max(e.layout.height)),
        Env::Craftsman(e) => Some(e.layout.width.max(e.layout.height)),
        Env::MountainCar(_) => None,
    }
}

/// A state of the product MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductState {
    pub env_state: EnvStateId,
    pub dfa_state: DfaStateId,
}

/// One step of a trajectory through the product MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajStep {
    pub env_state: EnvStateId,
    pub dfa_state: DfaStateId,
    pub action: ActionId,
    pub next_env_state: EnvStateId,
    pub next_dfa_state: DfaStateId,
    pub event: EventId,
}

/// A trajectory: the unit of preference comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub start: ProductState,
    pub steps: Vec<TrajStep>,
    pub terminal_accepted: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Final product state (the start state for an empty trajectory).
    pub fn final_state(&self) -> ProductState {
        self.steps
            .last()
            .map(|s| ProductState { env_state: s.next_env_state, dfa_state: s.next_dfa_state })
            .unwrap_or(self.start)
    }

    /// The emitted event word.
    pub fn events(&self) -> Vec<EventId> {
        self.steps.iter().map(|s| s.event).collect()
    }
}

/// An environment paired with a DFA. Labels are resolved to event ids once
/// at construction so stepping is table-driven.
#[derive(Debug, Clone)]
pub struct Product<'a> {
    pub env: &'a Env,
    pub dfa: &'a Dfa,
    labels: Vec<EventId>,
}

impl<'a> Product<'a> {
    pub fn new(env: &'a Env, dfa: &'a Dfa) -> Result<Self, EnvError> {
        let labels = (0..env.num_states())
            .map(|s| match env.label(s) {
                None => Ok(NULL_EVENT),
                Some(name) => dfa
                    .event_id(name)
                    .ok_or_else(|| EnvError::UnknownLabel { event: name.to_string() }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Product { env, dfa, labels })
    }

    pub fn initial_state(&self) -> ProductState {
        ProductState { env_state: self.env.initial(), dfa_state: self.dfa.initial() }
    }

    pub fn num_states(&self) -> usize {
        self.env.num_states() * self.dfa.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    /// Stable index of a product state: `env_state * |Q| + dfa_state`.
    pub fn index(&self, ps: ProductState) -> usize {
        ps.env_state * self.dfa.num_states() + ps.dfa_state
    }

    pub fn state_at(&self, index: usize) -> ProductState {
        let nq = self.dfa.num_states();
        ProductState { env_state: index / nq, dfa_state: index % nq }
    }

    /// Deterministic enumeration of all product states in index order.
    pub fn enumerate_states(&self) -> Vec<ProductState> {
        (0..self.num_states()).map(|i| self.state_at(i)).collect()
    }

    /// Event emitted by arriving in `next` from `prev`: the label of `next`
    /// if the environment state changed, the null event otherwise.
    pub fn event_for(&self, prev: EnvStateId, next: EnvStateId) -> EventId {
        if next != prev {
            self.labels[next]
        } else {
            NULL_EVENT
        }
    }

    /// Advances both components: the environment by its dynamics, the DFA by
    /// the emitted event.
    pub fn step(&self, ps: ProductState, a: ActionId, rng: &mut Prng) -> (ProductState, EventId) {
        let next_env = self.env.step(ps.env_state, a, rng);
        let event = self.event_for(ps.env_state, next_env);
        let next_dfa = self.dfa.step(ps.dfa_state, event);
        (ProductState { env_state: next_env, dfa_state: next_dfa }, event)
    }

    /// Whether `ps` ends an episode (its DFA state is accepting).
    pub fn is_terminal(&self, ps: ProductState) -> bool {
        self.dfa.is_accepting(ps.dfa_state)
    }

    /// Rolls out a policy for at most `horizon` steps, stopping early on DFA
    /// acceptance.
    pub fn rollout<F>(&self, mut policy: F, rng: &mut Prng, horizon: usize) -> Result<Trajectory, EnvError>
    where
        F: FnMut(ProductState, &mut Prng) -> ActionId,
    {
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        let start = self.initial_state();
        self.rollout_from(start, &mut policy, rng, horizon)
    }

    /// Rollout starting from an arbitrary product state.
    pub fn rollout_from<F>(
        &self,
        start: ProductState,
        policy: &mut F,
        rng: &mut Prng,
        horizon: usize,
    ) -> Result<Trajectory, EnvError>
    where
        F: FnMut(ProductState, &mut Prng) -> ActionId,
    {
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        let mut ps = start;
        let mut steps = Vec::new();
        let mut accepted = self.is_terminal(ps);
        while !accepted && steps.len() < horizon {
            let a = policy(ps, rng);
            let (next, event) = self.step(ps, a, rng);
            steps.push(TrajStep {
                env_state: ps.env_state,
                dfa_state: ps.dfa_state,
                action: a,
                next_env_state: next.env_state,
                next_dfa_state: next.dfa_state,
                event,
            });
            accepted = self.is_terminal(next);
            ps = next;
        }
        Ok(Trajectory { start, steps, terminal_accepted: accepted })
    }

    /// Enumerates every distinct trajectory from the initial state: actions
    /// branch at each step, branches stop at DFA acceptance or `horizon`.
    /// Fails once more than `max_trajectories` would be produced.
    pub fn enumerate_trajectories(
        &self,
        horizon: usize,
        max_trajectories: usize,
    ) -> Result<Vec<Trajectory>, EnvError> {
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        let mut out = Vec::new();
        let mut steps = Vec::new();
        let mut rng = Prng::seed_from_u64(0); // dynamics are deterministic
        self.enumerate_rec(self.initial_state(), &mut steps, horizon, max_trajectories, &mut rng, &mut out)?;
        Ok(out)
    }

    fn enumerate_rec(
        &self,
        ps: ProductState,
        steps: &mut Vec<TrajStep>,
        horizon: usize,
        max_trajectories: usize,
        rng: &mut Prng,
        out: &mut Vec<Trajectory>,
    ) -> Result<(), EnvError> {
        if self.is_terminal(ps) || steps.len() == horizon {
            if out.len() == max_trajectories {
                return Err(EnvError::EnumerationOverflow { max: max_trajectories });
            }
            out.push(Trajectory {
                start: self.initial_state(),
                steps: steps.clone(),
                terminal_accepted: self.is_terminal(ps),
            });
            return Ok(());
        }
        for a in 0..self.num_actions() {
            let (next, event) = self.step(ps, a, rng);
            steps.push(TrajStep {
                env_state: ps.env_state,
                dfa_state: ps.dfa_state,
                action: a,
                next_env_state: next.env_state,
                next_dfa_state: next.dfa_state,
                event,
            });
            self.enumerate_rec(next, steps, horizon, max_trajectories, rng, out)?;
            steps.pop();
        }
        Ok(())
    }

    /// Product states reachable from the initial state (terminal states are
    /// not expanded), in index order.
    pub fn reachable_states(&self) -> Vec<ProductState> {
        let mut seen = vec![false; self.num_states()];
        let mut rng = Prng::seed_from_u64(0); // dynamics are deterministic
        let start = self.initial_state();
        seen[self.index(start)] = true;
        let mut queue = vec![start];
        while let Some(ps) = queue.pop() {
            if self.is_terminal(ps) {
                continue;
            }
            for a in 0..self.num_actions() {
                let (next, _) = self.step(ps, a, &mut rng);
                let idx = self.index(next);
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push(next);
                }
            }
        }
        (0..self.num_states()).filter(|&i| seen[i]).map(|i| self.state_at(i)).collect()
    }
}

/// Uniformly random action selection.
pub fn random_policy(product: &Product) -> impl FnMut(ProductState, &mut Prng) -> ActionId {
    let n = product.num_actions();
    move |_ps, rng| rng.random_range(0..n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> (Env, Dfa) {
        (make_env("chain3", &EnvParams::default()).unwrap(), bundled_dfa("chain3").unwrap())
    }

    #[test]
    fn chain3_dynamics_and_labels() {
        let (env, _) = chain3();
        let mut rng = Prng::seed_from_u64(0);
        // actions: 0 = left, 1 = right
        assert_eq!(env.step(0, 1, &mut rng), 1);
        assert_eq!(env.label(1), None);
        assert_eq!(env.step(1, 1, &mut rng), 2);
        assert_eq!(env.label(2), Some("a"));
        assert_eq!(env.step(0, 0, &mut rng), 0); // boundary no-op
    }

    #[test]
    fn product_step_composes_env_and_dfa() {
        let (env, dfa) = chain3();
        let p = Product::new(&env, &dfa).unwrap();
        let mut rng = Prng::seed_from_u64(0);
        let (next, event) = p.step(ProductState { env_state: 1, dfa_state: 0 }, 1, &mut rng);
        assert_eq!(next, ProductState { env_state: 2, dfa_state: 1 });
        assert_eq!(dfa.event_name(event), "a");
        // Absorbing accepting corner: the blocked move is a no-op and emits null.
        let (stay, event) = p.step(ProductState { env_state: 3, dfa_state: 2 }, 1, &mut rng);
        assert_eq!(stay, ProductState { env_state: 3, dfa_state: 2 });
        assert_eq!(event, NULL_EVENT);
    }

    #[test]
    fn rollout_terminates_on_acceptance() {
        let (env, dfa) = chain3();
        let p = Product::new(&env, &dfa).unwrap();
        let mut rng = Prng::seed_from_u64(0);
        let t = p.rollout(|_, _| 1, &mut rng, 10).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.terminal_accepted);

        let t = p.rollout(|_, _| 0, &mut rng, 5).unwrap();
        assert_eq!(t.len(), 5);
        assert!(!t.terminal_accepted);

        assert_eq!(p.rollout(|_, _| 0, &mut rng, 0), Err(EnvError::ZeroHorizon));
    }

    #[test]
    fn enumeration_is_stable_and_sized() {
        let (env, dfa) = chain3();
        let p = Product::new(&env, &dfa).unwrap();
        let states = p.enumerate_states();
        assert_eq!(states.len(), 4 * 3);
        assert_eq!(states, p.enumerate_states());
        for (i, ps) in states.iter().enumerate() {
            assert_eq!(p.index(*ps), i);
        }
    }

    #[test]
    fn make_env_rejects_unknown_names_and_zero_horizon() {
        assert!(matches!(
            make_env("nope", &EnvParams::default()),
            Err(EnvError::UnknownEnv(n)) if n == "nope"
        ));
        assert!(matches!(
            make_env("chain3", &EnvParams { horizon: Some(0) }),
            Err(EnvError::ZeroHorizon)
        ));
    }

    #[test]
    fn bundled_layouts_have_reachable_subgoals() {
        for name in env_names() {
            let env = make_env(name, &EnvParams::default()).unwrap();
            match &env {
                Env::Grid(e) => assert!(e.layout.all_subgoals_reachable(), "{name}"),
                Env::Craftsman(e) => assert!(e.layout.all_subgoals_reachable(), "{name}"),
                Env::MountainCar(_) => {}
            }
        }
    }

    #[test]
    fn bundled_dfas_parse_and_pair_with_envs() {
        for name in env_names() {
            let env = make_env(name, &EnvParams::default()).unwrap();
            let dfa = bundled_dfa(name).unwrap();
            Product::new(&env, &dfa).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn student_variants_preserve_events_and_determinism() {
        let env = make_env("iron_sword", &EnvParams::default()).unwrap();
        let a = build_student_variant(&env, 10, 7).unwrap();
        let b = build_student_variant(&env, 10, 7).unwrap();
        match (&a, &b) {
            (Env::Grid(a), Env::Grid(b)) => {
                assert_eq!(a.layout, b.layout);
                assert_eq!(a.layout.width, 10);
                assert!(a.layout.all_subgoals_reachable());
            }
            _ => panic!("expected gridworlds"),
        }
        let dfa = bundled_dfa("iron_sword").unwrap();
        Product::new(&a, &dfa).unwrap();

        // Identity passthrough at the original size.
        let same = build_student_variant(&env, 5, 3).unwrap();
        match (&env, &same) {
            (Env::Grid(x), Env::Grid(y)) => assert_eq!(x.layout, y.layout),
            _ => panic!(),
        }

        let mc = make_env("mountain_car", &EnvParams::default()).unwrap();
        assert!(matches!(build_student_variant(&mc, 30, 0), Err(EnvError::NotAGridworld(_))));
        assert!(matches!(build_student_variant(&env, 3, 0), Err(EnvError::ScaleTooSmall { .. })));
    }

    #[test]
    fn rollout_replay_matches_run_trace() {
        for name in env_names() {
            let env = make_env(name, &EnvParams::default()).unwrap();
            let dfa = bundled_dfa(name).unwrap();
            let p = Product::new(&env, &dfa).unwrap();
            for seed in 0..5 {
                let mut rng = Prng::seed_from_u64(seed);
                let t = p.rollout(random_policy(&p), &mut rng, 60).unwrap();
                let trace = dfa.run_trace(&t.events());
                let visited: Vec<_> = std::iter::once(t.start.dfa_state)
                    .chain(t.steps.iter().map(|s| s.next_dfa_state))
                    .collect();
                assert_eq!(trace.visited, visited, "{name} seed {seed}");
                assert_eq!(trace.accepted, t.terminal_accepted);
            }
        }
    }
}
