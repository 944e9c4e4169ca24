//! Reward definitions over product-MDP transitions.
//!
//! Every source answers "what reward does this transition earn" from the
//! DFA's view of the event: progress transitions (distance to acceptance
//! strictly drops) are the completed subgoals, a non-null event that
//! self-loops here but is a progress event elsewhere is an out-of-order
//! attempt, and entering an accepting state completes the task.

use crate::automaton::{Dfa, NULL_EVENT};
use crate::learner::{LearnerError, Transition};
use crate::reward_model::RewardTable;

/// The hand-crafted environment reward, also the reference reward used for
/// cross-method metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownParams {
    pub subgoal: f64,
    pub out_of_order: f64,
    pub goal: f64,
    pub goal_out_of_order: f64,
    pub step: f64,
}

impl Default for KnownParams {
    fn default() -> Self {
        KnownParams {
            subgoal: 3.0,
            out_of_order: -1.0,
            goal: 9.0,
            goal_out_of_order: -3.0,
            step: -0.1,
        }
    }
}

/// Reward machine constants: fixed numeric rewards per automaton transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmParams {
    pub progress: f64,
    pub out_of_order: f64,
    pub terminal: f64,
    pub step: f64,
}

impl Default for RmParams {
    fn default() -> Self {
        RmParams { progress: 5.0, out_of_order: -1.0, terminal: 10.0, step: -0.1 }
    }
}

/// Base reward without shaping: a step penalty plus a terminal bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceParams {
    pub step: f64,
    pub accept: f64,
}

impl Default for AcceptanceParams {
    fn default() -> Self {
        AcceptanceParams { step: -0.1, accept: 10.0 }
    }
}

/// Potential-based shaping over DFA distances:
/// `r' = base + gamma * phi(q') - phi(q)` with `phi(q) = -distance(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpoplShaping {
    pub base: AcceptanceParams,
    pub gamma: f64,
    potentials: Vec<f64>,
}

impl LpoplShaping {
    /// Precomputes potentials; fails if any DFA state cannot reach
    /// acceptance.
    pub fn new(dfa: &Dfa, gamma: f64) -> Result<Self, LearnerError> {
        let potentials = (0..dfa.num_states())
            .map(|q| dfa.potential(q))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LpoplShaping { base: AcceptanceParams::default(), gamma, potentials })
    }

    pub fn potential(&self, q: usize) -> f64 {
        self.potentials[q]
    }
}

/// Minimal DFA shaping: a bonus on progress transitions, a step penalty
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    pub progress: f64,
    pub step: f64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        ShapingParams { progress: 1.0, step: -0.1 }
    }
}

/// A reward definition over product transitions.
#[derive(Debug, Clone)]
pub enum RewardSource<'a> {
    /// The learned tabular reward model.
    Learned(&'a RewardTable),
    /// Hand-crafted subgoal/goal reward.
    Known(KnownParams),
    /// Reward machine constants on automaton transitions.
    RewardMachine(RmParams),
    /// Potential-based shaping from DFA distances.
    Lpopl(LpoplShaping),
    /// The unshaped base of [`RewardSource::Lpopl`].
    AcceptanceBase(AcceptanceParams),
    /// Minimal distillation shaping.
    DistillShaping(ShapingParams),
}

/// Entering an accepting DFA state on this transition.
fn entered_accepting(dfa: &Dfa, t: &Transition) -> bool {
    dfa.is_accepting(t.next_state.dfa_state) && !dfa.is_accepting(t.state.dfa_state)
}

/// A non-null event that self-loops here but is a progress event from some
/// other DFA state: the weakest DFA-only notion of a wrong-order attempt.
fn out_of_order(dfa: &Dfa, t: &Transition) -> bool {
    t.event != NULL_EVENT
        && t.next_state.dfa_state == t.state.dfa_state
        && dfa.is_progress_somewhere(t.event)
}

impl RewardSource<'_> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            RewardSource::Learned(_) => "learned",
            RewardSource::Known(_) => "known",
            RewardSource::RewardMachine(_) => "reward_machine",
            RewardSource::Lpopl(_) => "lpopl",
            RewardSource::AcceptanceBase(_) => "acceptance_base",
            RewardSource::DistillShaping(_) => "distill_shaping",
        }
    }

    pub fn eval(&self, dfa: &Dfa, t: &Transition) -> f64 {
        let q = t.state.dfa_state;
        let progress = dfa.is_progress(q, t.event);
        match self {
            RewardSource::Learned(table) => table.reward_at(t.state_index, t.action),
            RewardSource::Known(p) => {
                let mut r = p.step;
                if t.event != NULL_EVENT {
                    if dfa.is_goal_event(t.event) {
                        r += if progress && entered_accepting(dfa, t) {
                            p.goal
                        } else if progress {
                            p.subgoal
                        } else {
                            p.goal_out_of_order
                        };
                    } else if progress {
                        r += p.subgoal;
                    } else if out_of_order(dfa, t) {
                        r += p.out_of_order;
                    }
                }
                r
            }
            RewardSource::RewardMachine(p) => {
                let mut r = p.step;
                if progress {
                    r += p.progress;
                } else if out_of_order(dfa, t) {
                    r += p.out_of_order;
                }
                if entered_accepting(dfa, t) {
                    r += p.terminal;
                }
                r
            }
            RewardSource::Lpopl(p) => {
                let mut r = p.base.step;
                if entered_accepting(dfa, t) {
                    r += p.base.accept;
                }
                r + p.gamma * p.potential(t.next_state.dfa_state) - p.potential(q)
            }
            RewardSource::AcceptanceBase(p) => {
                let mut r = p.step;
                if entered_accepting(dfa, t) {
                    r += p.accept;
                }
                r
            }
            RewardSource::DistillShaping(p) => {
                if progress {
                    p.progress
                } else {
                    p.step
                }
            }
        }
    }
}
