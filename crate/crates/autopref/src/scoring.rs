//! DFA-derived trajectory scores and preference-pair generation.
//!
//! Trajectories are ranked, never rewarded, by these scores: the subtask
//! score counts subgoals completed in order (DFA progress transitions) and
//! subtracts a distance-to-next-subgoal term, while the transition-value
//! score sums distilled teacher values over the trajectory's automaton
//! transitions. Comparing two scores yields a preference; preference pairs
//! are the training data for the reward model.

use std::collections::HashSet;

use rand::Rng;
use thiserror::Error;

use crate::distill::TransitionValueTable;
use crate::envs::{Prng, Product, Trajectory};

/// Scores closer than this are a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("score weights must be finite and non-negative")]
    InvalidWeights,
    #[error(
        "subgoal weight {subgoal} cannot dominate: distance weight {distance} over grid \
         diameter {diameter} reaches {max_distance_term}"
    )]
    SubgoalWeightTooSmall { subgoal: f64, distance: f64, diameter: i32, max_distance_term: f64 },
    #[error("preference generation needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),
}

/// Weights of the combined trajectory score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    /// Weight per subgoal completed in order.
    pub subgoal: f64,
    /// Weight of the Manhattan distance from the final state to the next
    /// required subgoal.
    pub distance: f64,
    /// Weight of the summed automaton transition values (used when a
    /// [`TransitionValueTable`] is attached).
    pub transition_value: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { subgoal: 10.0, distance: 0.1, transition_value: 1.0 }
    }
}

impl ScoreWeights {
    /// Checks that weights are finite, non-negative, and that completing one
    /// more subgoal outweighs any distance disadvantage on a grid of the
    /// given diameter (`subgoal >= distance * diameter`).
    pub fn validate(&self, diameter: i32) -> Result<(), ScoringError> {
        let all = [self.subgoal, self.distance, self.transition_value];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoringError::InvalidWeights);
        }
        let max_distance_term = self.distance * diameter as f64;
        if self.subgoal < max_distance_term {
            return Err(ScoringError::SubgoalWeightTooSmall {
                subgoal: self.subgoal,
                distance: self.distance,
                diameter,
                max_distance_term,
            });
        }
        Ok(())
    }
}

/// Number of subgoals a trajectory completed in order: the drop in DFA
/// distance-to-acceptance from its first to its last automaton state. For a
/// linear DFA this equals the count of subgoal events triggered in order.
pub fn subgoals_completed(trajectory: &Trajectory, product: &Product) -> i64 {
    let from = trajectory.start.dfa_state;
    let to = trajectory.final_state().dfa_state;
    match (product.dfa.distance_to_acceptance(from), product.dfa.distance_to_acceptance(to)) {
        (Some(a), Some(b)) => a as i64 - b as i64,
        // Dead DFA states: fall back to counting progress transitions.
        _ => trajectory
            .steps
            .iter()
            .filter(|s| product.dfa.is_progress(s.dfa_state, s.event))
            .count() as i64,
    }
}

/// Manhattan distance from the trajectory's final environment state to the
/// nearest cell of any progress event from its final DFA state. Zero once
/// the task is accepted (or when no progress event has a known cell).
pub fn distance_to_next_subgoal(trajectory: &Trajectory, product: &Product) -> f64 {
    let end = trajectory.final_state();
    if product.dfa.is_accepting(end.dfa_state) {
        return 0.0;
    }
    let (x, y) = product.env.position(end.env_state);
    product
        .dfa
        .progress_events(end.dfa_state)
        .iter()
        .flat_map(|&e| product.env.event_positions(product.dfa.event_name(e)))
        .map(|(cx, cy)| ((cx - x).abs() + (cy - y).abs()) as f64)
        .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
        .unwrap_or(0.0)
}

/// Subtask-based score: `subgoal_weight * N_s - distance_weight * d`.
pub fn subtask_score(trajectory: &Trajectory, product: &Product, weights: &ScoreWeights) -> f64 {
    weights.subgoal * subgoals_completed(trajectory, product) as f64
        - weights.distance * distance_to_next_subgoal(trajectory, product)
}

/// Transition-value score: the sum of distilled teacher values over the
/// trajectory's automaton transitions, null-event steps contributing the
/// `(q, null)` entry.
pub fn transition_value_score(trajectory: &Trajectory, values: &TransitionValueTable) -> f64 {
    trajectory.steps.iter().map(|s| values.value(s.dfa_state, s.event)).sum()
}

/// Combined score: subtask score plus weighted transition values.
pub fn combined_score(
    trajectory: &Trajectory,
    product: &Product,
    weights: &ScoreWeights,
    values: &TransitionValueTable,
) -> f64 {
    subtask_score(trajectory, product, weights)
        + weights.transition_value * transition_value_score(trajectory, values)
}

/// A trajectory scorer: weights plus an optional transition-value table.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    pub weights: ScoreWeights,
    pub values: Option<&'a TransitionValueTable>,
}

impl<'a> Scorer<'a> {
    /// Subtask-only scorer. Validates the weights against the environment's
    /// grid diameter.
    pub fn subtask(weights: ScoreWeights, product: &Product) -> Result<Self, ScoringError> {
        weights.validate(product.env.diameter())?;
        Ok(Scorer { weights, values: None })
    }

    /// Combined scorer with transition values attached.
    pub fn combined(
        weights: ScoreWeights,
        values: &'a TransitionValueTable,
        product: &Product,
    ) -> Result<Self, ScoringError> {
        weights.validate(product.env.diameter())?;
        Ok(Scorer { weights, values: Some(values) })
    }

    pub fn score(&self, trajectory: &Trajectory, product: &Product) -> f64 {
        match self.values {
            Some(values) => combined_score(trajectory, product, &self.weights, values),
            None => subtask_score(trajectory, product, &self.weights),
        }
    }
}

/// Which trajectory of a pair is preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefOutcome {
    First,
    Second,
    /// Scores within [`TIE_TOLERANCE`] of each other.
    Indifferent,
}

/// A scored trajectory pair. `pair` holds indices into the batch the
/// preference was generated from (`(0, 1)` for a standalone comparison).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preference {
    pub pair: (usize, usize),
    pub scores: (f64, f64),
    pub outcome: PrefOutcome,
}

impl Preference {
    /// Returns `(preferred, other)` batch indices, `None` when indifferent.
    pub fn ordered(&self) -> Option<(usize, usize)> {
        match self.outcome {
            PrefOutcome::First => Some((self.pair.0, self.pair.1)),
            PrefOutcome::Second => Some((self.pair.1, self.pair.0)),
            PrefOutcome::Indifferent => None,
        }
    }
}

/// Compares two scores under the tie tolerance.
pub fn outcome_of(score1: f64, score2: f64) -> PrefOutcome {
    if (score1 - score2).abs() <= TIE_TOLERANCE {
        PrefOutcome::Indifferent
    } else if score1 > score2 {
        PrefOutcome::First
    } else {
        PrefOutcome::Second
    }
}

/// Scores a pair of trajectories and states the preference.
pub fn prefer(
    first: &Trajectory,
    second: &Trajectory,
    scorer: &Scorer,
    product: &Product,
) -> Preference {
    let s1 = scorer.score(first, product);
    let s2 = scorer.score(second, product);
    Preference { pair: (0, 1), scores: (s1, s2), outcome: outcome_of(s1, s2) }
}

/// How trajectory pairs are drawn for preference generation.
#[derive(Debug, Clone, Copy)]
pub struct PairingPolicy {
    /// Take every pair when the batch is at most this large.
    pub all_pairs_max: usize,
    /// Otherwise sample this many distinct pairs uniformly.
    pub sample_pairs: usize,
}

impl Default for PairingPolicy {
    fn default() -> Self {
        PairingPolicy { all_pairs_max: 60, sample_pairs: 2000 }
    }
}

/// Scores a trajectory batch and produces preferences over pairs drawn per
/// the pairing policy. Indifferent pairs are dropped.
pub fn generate_preferences(
    trajectories: &[Trajectory],
    scorer: &Scorer,
    product: &Product,
    policy: &PairingPolicy,
    rng: &mut Prng,
) -> Result<Vec<Preference>, ScoringError> {
    let n = trajectories.len();
    if n < 2 {
        return Err(ScoringError::TooFewTrajectories(n));
    }
    let scores: Vec<f64> = trajectories.iter().map(|t| scorer.score(t, product)).collect();
    let mut preferences = Vec::new();
    let push = |i: usize, j: usize, out: &mut Vec<Preference>| {
        let outcome = outcome_of(scores[i], scores[j]);
        if outcome != PrefOutcome::Indifferent {
            out.push(Preference { pair: (i, j), scores: (scores[i], scores[j]), outcome });
        }
    };
    if n <= policy.all_pairs_max {
        for i in 0..n {
            for j in i + 1..n {
                push(i, j, &mut preferences);
            }
        }
    } else {
        let total = n * (n - 1) / 2;
        let wanted = policy.sample_pairs.min(total);
        let mut seen = HashSet::with_capacity(wanted);
        while seen.len() < wanted {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key) {
                push(key.0, key.1, &mut preferences);
            }
        }
    }
    Ok(preferences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{bundled_dfa, make_env, random_policy, Env, EnvParams};
    use crate::Dfa;
    use rand::SeedableRng;

    fn chain3() -> (Env, Dfa) {
        (make_env("chain3", &EnvParams::default()).unwrap(), bundled_dfa("chain3").unwrap())
    }

    fn run(product: &Product, actions: &[usize], horizon: usize) -> Trajectory {
        let mut i = 0;
        let mut rng = Prng::seed_from_u64(0);
        product
            .rollout(
                |_, _| {
                    let a = actions[i % actions.len()];
                    i += 1;
                    a
                },
                &mut rng,
                horizon,
            )
            .unwrap()
    }

    fn weights(subgoal: f64, distance: f64, transition_value: f64) -> ScoreWeights {
        ScoreWeights { subgoal, distance, transition_value }
    }

    #[test]
    fn subtask_score_on_chain3_fixture() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let w = weights(10.0, 0.1, 0.0);

        // right,right,right: accepted, both subgoals count, distance 0.
        let accepted = run(&product, &[1], 10);
        assert!(accepted.terminal_accepted);
        assert_eq!(subtask_score(&accepted, &product, &w), 20.0);

        // right,left: ends at cell 0, nothing completed, next subgoal at cell 2.
        let back = run(&product, &[1, 0], 2);
        assert_eq!(subtask_score(&back, &product, &w), -0.2);

        // Empty trajectory at the start.
        let empty = Trajectory {
            start: product.initial_state(),
            steps: Vec::new(),
            terminal_accepted: false,
        };
        assert_eq!(subtask_score(&empty, &product, &w), -0.2);
    }

    fn demo_table(dfa: &Dfa) -> TransitionValueTable {
        let mut table = TransitionValueTable::new(dfa.name(), 0.0);
        table.insert(0, dfa.event_id("a").unwrap(), 1, 3.0);
        table.insert(1, dfa.event_id("g").unwrap(), 1, 5.0);
        table
    }

    #[test]
    fn transition_value_score_sums_entries() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let table = demo_table(&dfa);

        let accepted = run(&product, &[1], 10); // events: null, a, g
        assert_eq!(transition_value_score(&accepted, &table), 8.0);

        let empty = Trajectory {
            start: product.initial_state(),
            steps: Vec::new(),
            terminal_accepted: false,
        };
        assert_eq!(transition_value_score(&empty, &table), 0.0);

        let all_null = run(&product, &[0], 4);
        assert_eq!(transition_value_score(&all_null, &table), 0.0);
    }

    #[test]
    fn combined_score_degenerate_weights() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let table = demo_table(&dfa);
        let accepted = run(&product, &[1], 10);

        let w = weights(10.0, 0.1, 0.0);
        assert_eq!(
            combined_score(&accepted, &product, &w, &table),
            subtask_score(&accepted, &product, &w)
        );
        let w = weights(0.0, 0.0, 2.0);
        assert_eq!(combined_score(&accepted, &product, &w, &table), 16.0);
        let w = weights(10.0, 0.1, 1.0);
        assert_eq!(combined_score(&accepted, &product, &w, &table), 28.0);
    }

    #[test]
    fn prefer_orders_by_score_with_tie_tolerance() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let scorer = Scorer::subtask(weights(10.0, 0.1, 0.0), &product).unwrap();
        let good = run(&product, &[1], 10);
        let bad = run(&product, &[1, 0], 2);

        let p = prefer(&good, &bad, &scorer, &product);
        assert_eq!(p.outcome, PrefOutcome::First);
        assert_eq!(p.ordered(), Some((0, 1)));
        let p = prefer(&bad, &good, &scorer, &product);
        assert_eq!(p.outcome, PrefOutcome::Second);
        assert_eq!(p.ordered(), Some((1, 0)));

        let p = prefer(&good, &good, &scorer, &product);
        assert_eq!(p.outcome, PrefOutcome::Indifferent);
        assert_eq!(outcome_of(5.0, 5.0 + 1e-12), PrefOutcome::Indifferent);
    }

    #[test]
    fn generate_preferences_all_pairs_and_sampled() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let scorer = Scorer::subtask(weights(10.0, 0.1, 0.0), &product).unwrap();
        let mut rng = Prng::seed_from_u64(1);

        // Three distinct-score trajectories -> all three pairs kept.
        let trajs = vec![run(&product, &[1], 10), run(&product, &[1, 0], 2), run(&product, &[1], 1)];
        let prefs =
            generate_preferences(&trajs, &scorer, &product, &PairingPolicy::default(), &mut rng)
                .unwrap();
        assert_eq!(prefs.len(), 3);

        // Two identical trajectories -> indifferent pair dropped.
        let twins = vec![trajs[0].clone(), trajs[0].clone()];
        let prefs =
            generate_preferences(&twins, &scorer, &product, &PairingPolicy::default(), &mut rng)
                .unwrap();
        assert!(prefs.is_empty());

        // Sampling caps the number of pairs.
        let mut many = Vec::new();
        for k in 0..100 {
            many.push(run(&product, &[1, 0], (k % 7) + 1));
        }
        let policy = PairingPolicy { all_pairs_max: 60, sample_pairs: 50 };
        let prefs = generate_preferences(&many, &scorer, &product, &policy, &mut rng).unwrap();
        assert!(prefs.len() <= 50);

        let one = vec![trajs[0].clone()];
        assert_eq!(
            generate_preferences(&one, &scorer, &product, &PairingPolicy::default(), &mut rng),
            Err(ScoringError::TooFewTrajectories(1))
        );
    }

    #[test]
    fn weights_validation_enforces_dominance() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        assert!(Scorer::subtask(ScoreWeights::default(), &product).is_ok());
        assert!(Scorer::subtask(weights(0.0, 0.0, 1.0), &product).is_ok());
        assert!(matches!(
            Scorer::subtask(weights(0.1, 0.1, 0.0), &product),
            Err(ScoringError::SubgoalWeightTooSmall { .. })
        ));
        assert_eq!(
            weights(-1.0, 0.0, 0.0).validate(3),
            Err(ScoringError::InvalidWeights)
        );
    }

    #[test]
    fn more_subgoals_dominates_any_distance_disadvantage() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let scorer = Scorer::subtask(ScoreWeights::default(), &product).unwrap();
        let mut rng = Prng::seed_from_u64(9);
        let mut trajs = Vec::new();
        for _ in 0..40 {
            trajs.push(product.rollout(random_policy(&product), &mut rng, 8).unwrap());
        }
        for a in &trajs {
            for b in &trajs {
                let na = subgoals_completed(a, &product);
                let nb = subgoals_completed(b, &product);
                if na > nb {
                    let p = prefer(a, b, &scorer, &product);
                    assert_eq!(p.outcome, PrefOutcome::First);
                }
            }
        }
    }

    #[test]
    fn transition_value_score_is_additive_under_concatenation() {
        let (env, dfa) = chain3();
        let product = Product::new(&env, &dfa).unwrap();
        let table = demo_table(&dfa);
        let whole = run(&product, &[1], 10);
        let (head, tail) = whole.steps.split_at(1);
        let first = Trajectory {
            start: whole.start,
            steps: head.to_vec(),
            terminal_accepted: false,
        };
        let second = Trajectory {
            start: first.final_state(),
            steps: tail.to_vec(),
            terminal_accepted: whole.terminal_accepted,
        };
        assert_eq!(
            transition_value_score(&whole, &table),
            transition_value_score(&first, &table) + transition_value_score(&second, &table)
        );
    }
}
