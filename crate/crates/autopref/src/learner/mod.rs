//! Tabular Q-learning on the product MDP, the baseline reward definitions,
//! annealed teacher-student updates, the static/dynamic training loops, and
//! an exact value-iteration oracle.

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::automaton::{Dfa, DfaError, EventId};
use crate::distill::TransitionValueTable;
use crate::envs::{ActionId, EnvError, Prng, Product, ProductState};
use crate::reward_model::RewardModelError;
use crate::scoring::ScoringError;

mod loops;
mod rewards;
mod vi;

pub use loops::{
    run_dynamic, run_static, train_baseline, BaselineRun, DynamicConfig, DynamicRun,
    LearnerConfig, StaticRun,
};
pub use rewards::{
    AcceptanceParams, KnownParams, LpoplShaping, RewardSource, RmParams, ShapingParams,
};
pub use vi::value_iteration;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("non-finite reward encountered during learning")]
    NonFiniteReward,
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("gamma must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("rho must lie in (0, 1), got {0}")]
    BadRho(f64),
    #[error("qtable snapshot line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Dfa(#[from] DfaError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    RewardModel(#[from] RewardModelError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exploration rate as a function of the episode index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Constant(f64),
    /// Linear from `start` to `end` over the first `fraction` of
    /// `total_episodes`, held at `end` afterwards.
    Linear { start: f64, end: f64, fraction: f64, total_episodes: usize },
}

impl EpsilonSchedule {
    pub fn epsilon(&self, episode: usize) -> f64 {
        match *self {
            EpsilonSchedule::Constant(e) => e,
            EpsilonSchedule::Linear { start, end, fraction, total_episodes } => {
                let anneal_len = (total_episodes as f64 * fraction).max(1.0);
                let t = episode as f64 / anneal_len;
                if t >= 1.0 {
                    end
                } else {
                    start + (end - start) * t
                }
            }
        }
    }
}

/// One product-MDP transition, as consumed by Q-updates and reward sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: ProductState,
    pub action: ActionId,
    pub next_state: ProductState,
    pub event: EventId,
    /// The next state's DFA component is accepting: the episode ends here.
    pub terminal: bool,
    pub state_index: usize,
    pub next_state_index: usize,
}

impl Transition {
    /// Executes `action` from `state` and packages the observed transition.
    pub fn observe(product: &Product, state: ProductState, action: ActionId, rng: &mut Prng) -> Self {
        let (next_state, event) = product.step(state, action, rng);
        Transition {
            state,
            action,
            next_state,
            event,
            terminal: product.is_terminal(next_state),
            state_index: product.index(state),
            next_state_index: product.index(next_state),
        }
    }
}

/// Visit-count-annealed blending of teacher transition values into the
/// student's Q-targets: the blend weight for transition `(q, σ)` is
/// `rho^n(q, σ)`, so guidance fades as the student gains its own experience.
#[derive(Debug, Clone)]
pub struct AnnealConfig {
    pub rho: f64,
    visit_counts: Vec<u64>,
    num_events: usize,
}

impl AnnealConfig {
    pub fn new(rho: f64, dfa: &Dfa) -> Result<Self, LearnerError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(LearnerError::BadRho(rho));
        }
        Ok(AnnealConfig {
            rho,
            visit_counts: vec![0; dfa.num_states() * dfa.num_events()],
            num_events: dfa.num_events(),
        })
    }

    pub fn visits(&self, q: usize, e: EventId) -> u64 {
        self.visit_counts[q * self.num_events + e]
    }

    fn bump(&mut self, q: usize, e: EventId) {
        self.visit_counts[q * self.num_events + e] += 1;
    }

    /// Current teacher weight `beta = rho^n` for a transition.
    pub fn beta(&self, q: usize, e: EventId) -> f64 {
        self.rho.powf(self.visits(q, e) as f64)
    }
}

/// Tabular action-value function over product-state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: Vec<f64>,
    n_states: usize,
    n_actions: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        QTable {
            q: vec![0.0; n_states * n_actions],
            n_states,
            n_actions,
            alpha,
            gamma,
            epsilon: EpsilonSchedule::Constant(0.1),
        }
    }

    pub fn with_epsilon(mut self, schedule: EpsilonSchedule) -> Self {
        self.epsilon = schedule;
        self
    }

    pub fn num_states(&self) -> usize {
        self.n_states
    }

    pub fn num_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value(&self, state_index: usize, action: ActionId) -> f64 {
        self.q[state_index * self.n_actions + action]
    }

    pub fn set(&mut self, state_index: usize, action: ActionId, value: f64) {
        self.q[state_index * self.n_actions + action] = value;
    }

    pub fn max_value(&self, state_index: usize) -> f64 {
        let row = &self.q[state_index * self.n_actions..(state_index + 1) * self.n_actions];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action with lowest-index tie-breaking. A positive tolerance
    /// treats near-maximal values as ties, which keeps policy extraction
    /// stable under floating-point noise.
    pub fn greedy_action_with_tol(&self, state_index: usize, tol: f64) -> ActionId {
        let max = self.max_value(state_index);
        (0..self.n_actions)
            .find(|&a| self.value(state_index, a) >= max - tol)
            .expect("non-empty action set")
    }

    /// Exact greedy action with lowest-index tie-breaking.
    pub fn greedy_action(&self, state_index: usize) -> ActionId {
        self.greedy_action_with_tol(state_index, 0.0)
    }

    /// ε-greedy action under the table's schedule.
    pub fn epsilon_greedy(&self, state_index: usize, episode: usize, rng: &mut Prng) -> ActionId {
        self.epsilon_greedy_with(state_index, self.epsilon.epsilon(episode), rng)
    }

    /// ε-greedy action at an explicit exploration rate.
    pub fn epsilon_greedy_with(&self, state_index: usize, eps: f64, rng: &mut Prng) -> ActionId {
        if rng.random::<f64>() < eps {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy_action(state_index)
        }
    }

    /// Standard Q-learning update:
    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') * [not terminal] - Q(s,a))`.
    pub fn q_update(&mut self, t: &Transition, reward: f64) {
        debug_assert!(reward.is_finite());
        let future = if t.terminal { 0.0 } else { self.max_value(t.next_state_index) };
        let target = reward + self.gamma * future;
        let i = t.state_index * self.n_actions + t.action;
        self.q[i] += self.alpha * (target - self.q[i]);
    }

    /// Annealed teacher-student update: the α-step moves toward
    /// `beta * teacher(q, σ) + (1 - beta) * (r + gamma * max Q(s'))` with
    /// `beta = rho^n(q, σ)`, then the visit count of `(q, σ)` is bumped.
    pub fn annealed_update(
        &mut self,
        t: &Transition,
        reward: f64,
        anneal: &mut AnnealConfig,
        teacher: &TransitionValueTable,
    ) {
        debug_assert!(reward.is_finite());
        let (q, e) = (t.state.dfa_state, t.event);
        let beta = anneal.beta(q, e);
        let future = if t.terminal { 0.0 } else { self.max_value(t.next_state_index) };
        let standard = reward + self.gamma * future;
        let target = beta * teacher.value(q, e) + (1.0 - beta) * standard;
        let i = t.state_index * self.n_actions + t.action;
        self.q[i] += self.alpha * (target - self.q[i]);
        anneal.bump(q, e);
    }

    /// Greedy policy over all states, extracted with a tie tolerance.
    pub fn greedy_policy(&self, tol: f64) -> Vec<ActionId> {
        (0..self.n_states).map(|s| self.greedy_action_with_tol(s, tol)).collect()
    }

    /// Max-norm distance to another table over the given state indices.
    pub fn max_norm_distance(&self, other: &QTable, states: impl Iterator<Item = usize>) -> f64 {
        let mut worst: f64 = 0.0;
        for s in states {
            for a in 0..self.n_actions {
                worst = worst.max((self.value(s, a) - other.value(s, a)).abs());
            }
        }
        worst
    }

    /// Writes the snapshot format: header with alpha, gamma and dimensions,
    /// then one `state action value` line per non-zero entry.
    pub fn save<W: Write>(&self, mut out: W) -> Result<(), LearnerError> {
        writeln!(out, "autopref qtable v1")?;
        writeln!(out, "alpha {}", self.alpha)?;
        writeln!(out, "gamma {}", self.gamma)?;
        writeln!(out, "dims {} {}", self.n_states, self.n_actions)?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let v = self.value(s, a);
                if v != 0.0 {
                    writeln!(out, "{s} {a} {v}")?;
                }
            }
        }
        Ok(())
    }

    /// Parses the snapshot format written by [`QTable::save`].
    pub fn load<R: Read>(reader: R) -> Result<Self, LearnerError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut expect = |want: &str| -> Result<String, LearnerError> {
            match lines.next() {
                Some((i, line)) => {
                    let line = line?;
                    line.strip_prefix(want).map(|r| r.trim().to_string()).ok_or_else(|| {
                        LearnerError::Format {
                            line: i + 1,
                            msg: format!("expected `{want}...`, found `{line}`"),
                        }
                    })
                }
                None => Err(LearnerError::Format { line: 0, msg: "unexpected end of file".into() }),
            }
        };
        expect("autopref qtable v1")?;
        let alpha: f64 = expect("alpha ")?
            .parse()
            .map_err(|e| LearnerError::Format { line: 2, msg: format!("bad alpha: {e}") })?;
        let gamma: f64 = expect("gamma ")?
            .parse()
            .map_err(|e| LearnerError::Format { line: 3, msg: format!("bad gamma: {e}") })?;
        let dims = expect("dims ")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| LearnerError::Format { line: 4, msg: format!("bad dims: {e}") })?;
        if dims.len() != 2 {
            return Err(LearnerError::Format { line: 4, msg: "dims needs 2 fields".into() });
        }
        let mut table = QTable::new(dims[0], dims[1], alpha, gamma);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(LearnerError::Format {
                    line: i + 1,
                    msg: "expected `state action value`".to_string(),
                });
            }
            let s: usize = parts[0]
                .parse()
                .map_err(|e| LearnerError::Format { line: i + 1, msg: format!("{e}") })?;
            let a: usize = parts[1]
                .parse()
                .map_err(|e| LearnerError::Format { line: i + 1, msg: format!("{e}") })?;
            let v: f64 = parts[2]
                .parse()
                .map_err(|e| LearnerError::Format { line: i + 1, msg: format!("{e}") })?;
            if s >= dims[0] || a >= dims[1] {
                return Err(LearnerError::Format {
                    line: i + 1,
                    msg: format!("index ({s},{a}) out of range"),
                });
            }
            table.set(s, a, v);
        }
        Ok(table)
    }
}

/// Discounted return of following the greedy policy of `q` from the initial
/// state, evaluated under `reward`. The environment is deterministic, so a
/// single rollout is exact.
pub fn greedy_return(
    product: &Product,
    q: &QTable,
    reward: &RewardSource,
    gamma: f64,
    horizon: usize,
) -> Result<f64, LearnerError> {
    let mut rng = Prng::seed_from_u64(0);
    let mut ps = product.initial_state();
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        if product.is_terminal(ps) {
            break;
        }
        let a = q.greedy_action_with_tol(product.index(ps), 1e-9);
        let t = Transition::observe(product, ps, a, &mut rng);
        total += discount * reward.eval(product.dfa, &t);
        discount *= gamma;
        ps = t.next_state;
    }
    Ok(total)
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{bundled_dfa, make_env, EnvParams};

    fn chain3_product() -> (crate::envs::Env, Dfa) {
        (make_env("chain3", &EnvParams::default()).unwrap(), bundled_dfa("chain3").unwrap())
    }

    fn transition(product: &Product, s: usize, q: usize, a: usize) -> Transition {
        let mut rng = Prng::seed_from_u64(0);
        Transition::observe(product, ProductState { env_state: s, dfa_state: q }, a, &mut rng)
    }

    #[test]
    fn q_update_single_step_arithmetic() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut q = QTable::new(product.num_states(), product.num_actions(), 0.5, 0.9);
        let mut t = transition(&product, 0, 0, 1);
        t.terminal = true;
        q.q_update(&t, 1.0);
        assert_eq!(q.value(t.state_index, 1), 0.5);

        // alpha = 0 leaves the table unchanged.
        let mut q0 = QTable::new(product.num_states(), product.num_actions(), 0.0, 0.9);
        q0.q_update(&t, 1.0);
        assert!(q0.q.iter().all(|&v| v == 0.0));

        // r = 0 on a zero table is a fixed point.
        let mut qz = QTable::new(product.num_states(), product.num_actions(), 0.5, 0.9);
        qz.q_update(&transition(&product, 0, 0, 0), 0.0);
        assert!(qz.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn epsilon_greedy_explores_and_exploits() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut q = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.9);

        // Pure exploitation with distinct values.
        q.set(0, 0, 0.2);
        q.set(0, 1, 0.7);
        let mut rng = Prng::seed_from_u64(0);
        assert_eq!(q.epsilon_greedy_with(0, 0.0, &mut rng), 1);

        // All-equal values tie-break to action 0.
        assert_eq!(q.epsilon_greedy_with(1, 0.0, &mut rng), 0);

        // Pure exploration is uniform: chi-squared over 10k draws, 1 dof,
        // critical value 10.83 at p = 0.001.
        let mut counts = [0u32; 2];
        for _ in 0..10_000 {
            counts[q.epsilon_greedy_with(0, 1.0, &mut rng)] += 1;
        }
        let expected = 5_000.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 10.83, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn annealed_update_blends_teacher_and_standard_targets() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut teacher = TransitionValueTable::new("chain3", 0.0);
        let a_event = dfa.event_id("a").unwrap();
        teacher.insert(0, a_event, 1, 4.0);

        // First visit: beta = 1, the alpha-step moves straight at the
        // teacher value.
        let mut q = QTable::new(product.num_states(), product.num_actions(), 1.0, 0.9);
        let mut anneal = AnnealConfig::new(0.5, &dfa).unwrap();
        let t = transition(&product, 1, 0, 1); // emits `a`
        assert_eq!(t.event, a_event);
        q.annealed_update(&t, 0.0, &mut anneal, &teacher);
        assert_eq!(q.value(t.state_index, 1), 4.0);
        assert_eq!(anneal.visits(0, a_event), 1);

        // rho = 0.5, one visit, teacher 4, standard target 2 -> target 3.
        let mut q = QTable::new(product.num_states(), product.num_actions(), 1.0, 0.9);
        let mut anneal = AnnealConfig::new(0.5, &dfa).unwrap();
        anneal.bump(0, a_event);
        q.set(t.next_state_index, 0, 2.0 / 0.9); // standard target = r + gamma*max = 2
        q.annealed_update(&t, 0.0, &mut anneal, &teacher);
        assert!((q.value(t.state_index, 1) - 3.0).abs() < 1e-12);

        // rho -> 0+ after the first visit: beta underflows and the update
        // matches q_update exactly.
        let mut q1 = QTable::new(product.num_states(), product.num_actions(), 0.5, 0.9);
        let mut q2 = q1.clone();
        let mut anneal = AnnealConfig::new(1e-300, &dfa).unwrap();
        anneal.bump(0, a_event);
        q1.annealed_update(&t, 1.0, &mut anneal, &teacher);
        q2.q_update(&t, 1.0);
        assert_eq!(q1.value(t.state_index, 1), q2.value(t.state_index, 1));

        assert!(matches!(AnnealConfig::new(1.5, &dfa), Err(LearnerError::BadRho(_))));
    }

    #[test]
    fn epsilon_schedule_anneals_then_holds() {
        let s = EpsilonSchedule::Linear { start: 1.0, end: 0.05, fraction: 0.6, total_episodes: 100 };
        assert_eq!(s.epsilon(0), 1.0);
        assert!((s.epsilon(30) - 0.525).abs() < 1e-12);
        assert_eq!(s.epsilon(60), 0.05);
        assert_eq!(s.epsilon(99), 0.05);
        assert_eq!(EpsilonSchedule::Constant(0.1).epsilon(1234), 0.1);
    }

    #[test]
    fn qtable_snapshot_round_trips() {
        let mut q = QTable::new(7, 3, 0.1, 0.95);
        q.set(0, 1, 1.0 / 3.0);
        q.set(6, 2, -2.75);
        let mut buf = Vec::new();
        q.save(&mut buf).unwrap();
        let loaded = QTable::load(buf.as_slice()).unwrap();
        assert_eq!(loaded.q, q.q);
        assert_eq!(loaded.alpha, q.alpha);
        assert_eq!(loaded.gamma, q.gamma);
    }
}
