//! Teacher experience collection and distillation of automaton transition
//! values.
//!
//! A teacher policy trained on a small environment is rolled out to collect
//! product-MDP experience; averaging the teacher's Q-values over the samples
//! that induce each automaton transition `(q, σ)` yields a
//! [`TransitionValueTable`]. The table drives transition-value trajectory
//! scoring and the annealed teacher-student Q-updates, letting task
//! knowledge move to larger environments that share the same DFA.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use crate::automaton::{Dfa, DfaStateId, EventId};
use crate::envs::{ActionId, Prng, Product, ProductState};
use crate::learner::QTable;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("transition value file, line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unknown DFA state `{0}` in transition value file")]
    UnknownState(String),
    #[error("unknown event `{0}` in transition value file")]
    UnknownEvent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One teacher experience sample: a product-MDP transition together with the
/// reward seen and the event that drove the DFA component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: ProductState,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: ProductState,
    pub event: EventId,
}

/// A set of teacher experience samples.
#[derive(Debug, Clone, Default)]
pub struct ExperienceSet {
    pub samples: Vec<Sample>,
    pub source_env: String,
}

/// Distilled mean teacher Q-values per automaton transition `(q, σ)`.
/// Missing keys are served `default` (0 unless configured otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionValueTable {
    pub dfa_name: String,
    pub default: f64,
    entries: BTreeMap<(DfaStateId, EventId), (u64, f64)>,
}

impl TransitionValueTable {
    pub fn new(dfa_name: impl Into<String>, default: f64) -> Self {
        TransitionValueTable { dfa_name: dfa_name.into(), default, entries: BTreeMap::new() }
    }

    /// Value for a transition; absent keys yield the default.
    pub fn value(&self, q: DfaStateId, e: EventId) -> f64 {
        self.entries.get(&(q, e)).map(|&(_, v)| v).unwrap_or(self.default)
    }

    /// Number of samples behind a keyed entry (0 if absent).
    pub fn count(&self, q: DfaStateId, e: EventId) -> u64 {
        self.entries.get(&(q, e)).map(|&(c, _)| c).unwrap_or(0)
    }

    pub fn insert(&mut self, q: DfaStateId, e: EventId, count: u64, value: f64) {
        self.entries.insert((q, e), (count, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DfaStateId, EventId, u64, f64)> + '_ {
        self.entries.iter().map(|(&(q, e), &(c, v))| (q, e, c, v))
    }

    /// Writes the table as text: a header with the DFA name and default,
    /// then one `state event count value` line per keyed entry. Values
    /// round-trip exactly.
    pub fn save<W: Write>(&self, dfa: &Dfa, mut out: W) -> Result<(), DistillError> {
        writeln!(out, "autopref tvalues v1")?;
        writeln!(out, "dfa {}", self.dfa_name)?;
        writeln!(out, "default {}", self.default)?;
        for (q, e, count, value) in self.iter() {
            writeln!(out, "{} {} {} {}", dfa.state_name(q), dfa.event_name(e), count, value)?;
        }
        Ok(())
    }

    /// Parses the text format written by [`TransitionValueTable::save`].
    pub fn load<R: Read>(dfa: &Dfa, reader: R) -> Result<Self, DistillError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut expect = |want: &str| -> Result<String, DistillError> {
            match lines.next() {
                Some((i, line)) => {
                    let line = line?;
                    line.strip_prefix(want).map(|rest| rest.trim().to_string()).ok_or_else(|| {
                        DistillError::Format {
                            line: i + 1,
                            msg: format!("expected `{want}...`, found `{line}`"),
                        }
                    })
                }
                None => Err(DistillError::Format { line: 0, msg: "unexpected end of file".into() }),
            }
        };
        expect("autopref tvalues v1")?;
        let dfa_name = expect("dfa ")?;
        let default: f64 = expect("default ")?
            .parse()
            .map_err(|e| DistillError::Format { line: 3, msg: format!("bad default: {e}") })?;
        let mut table = TransitionValueTable::new(dfa_name, default);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(DistillError::Format {
                    line: i + 1,
                    msg: "expected `state event count value`".to_string(),
                });
            }
            let q = dfa
                .state_id(parts[0])
                .ok_or_else(|| DistillError::UnknownState(parts[0].to_string()))?;
            let e = dfa
                .event_id(parts[1])
                .ok_or_else(|| DistillError::UnknownEvent(parts[1].to_string()))?;
            let count: u64 = parts[2]
                .parse()
                .map_err(|e| DistillError::Format { line: i + 1, msg: format!("bad count: {e}") })?;
            let value: f64 = parts[3]
                .parse()
                .map_err(|e| DistillError::Format { line: i + 1, msg: format!("bad value: {e}") })?;
            table.insert(q, e, count, value);
        }
        Ok(table)
    }
}

/// Rolls out an ε-greedy teacher policy (ε = 0.1) and records every product
/// transition as a sample.
pub fn collect_teacher_experience(
    product: &Product,
    teacher: &QTable,
    episodes: usize,
    rng: &mut Prng,
) -> ExperienceSet {
    const TEACHER_EPSILON: f64 = 0.1;
    let mut samples = Vec::new();
    for _ in 0..episodes {
        let mut ps = product.initial_state();
        for _ in 0..product.env.max_steps() {
            if product.is_terminal(ps) {
                break;
            }
            let a = teacher.epsilon_greedy_with(product.index(ps), TEACHER_EPSILON, rng);
            let (next, event) = product.step(ps, a, rng);
            samples.push(Sample {
                state: ps,
                action: a,
                reward: 0.0,
                next_state: next,
                event,
            });
            ps = next;
        }
    }
    ExperienceSet { samples, source_env: product.env.name().to_string() }
}

/// Transition frequencies `n(q, σ)`: how many samples left DFA state `q`
/// while the next environment state emitted `σ`.
pub fn transition_counts(experience: &ExperienceSet) -> BTreeMap<(DfaStateId, EventId), u64> {
    let mut counts = BTreeMap::new();
    for s in &experience.samples {
        *counts.entry((s.state.dfa_state, s.event)).or_insert(0) += 1;
    }
    counts
}

/// Averages the teacher's Q-value over the samples behind each automaton
/// transition. Keys never seen serve `default`.
pub fn distill_values(
    experience: &ExperienceSet,
    teacher: &QTable,
    product: &Product,
    default: f64,
) -> TransitionValueTable {
    let mut sums: BTreeMap<(DfaStateId, EventId), (u64, f64)> = BTreeMap::new();
    for s in &experience.samples {
        let q_value = teacher.value(product.index(s.state), s.action);
        let entry = sums.entry((s.state.dfa_state, s.event)).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += q_value;
    }
    let mut table = TransitionValueTable::new(product.dfa.name(), default);
    for ((q, e), (count, sum)) in sums {
        table.insert(q, e, count, sum / count as f64);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{bundled_dfa, make_env, EnvParams};
    use rand::SeedableRng;

    fn chain3_product() -> (crate::envs::Env, Dfa) {
        (make_env("chain3", &EnvParams::default()).unwrap(), bundled_dfa("chain3").unwrap())
    }

    #[test]
    fn counts_partition_the_sample_set() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let teacher = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.95);
        let mut rng = Prng::seed_from_u64(3);
        let experience = collect_teacher_experience(&product, &teacher, 10, &mut rng);
        assert!(experience.samples.len() >= 20);
        let counts = transition_counts(&experience);
        let total: u64 = counts.values().sum();
        assert_eq!(total as usize, experience.samples.len());
        assert!(transition_counts(&ExperienceSet::default()).is_empty());
    }

    #[test]
    fn collection_is_deterministic_and_dfa_consistent() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let teacher = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.95);
        let a = collect_teacher_experience(&product, &teacher, 5, &mut Prng::seed_from_u64(7));
        let b = collect_teacher_experience(&product, &teacher, 5, &mut Prng::seed_from_u64(7));
        assert_eq!(a.samples, b.samples);
        assert!(collect_teacher_experience(&product, &teacher, 0, &mut Prng::seed_from_u64(7))
            .samples
            .is_empty());
        for s in &a.samples {
            assert_eq!(dfa.step(s.state.dfa_state, s.event), s.next_state.dfa_state);
        }
    }

    #[test]
    fn distillation_averages_teacher_q_values() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut teacher = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.95);
        let s1 = ProductState { env_state: 1, dfa_state: 0 };
        let s2 = ProductState { env_state: 0, dfa_state: 0 };
        teacher.set(product.index(s1), 1, 2.0);
        teacher.set(product.index(s2), 1, 4.0);
        let a = dfa.event_id("a").unwrap();
        let experience = ExperienceSet {
            samples: vec![
                Sample { state: s1, action: 1, reward: 0.0, next_state: s1, event: a },
                Sample { state: s2, action: 1, reward: 0.0, next_state: s1, event: a },
            ],
            source_env: "chain3".to_string(),
        };
        let table = distill_values(&experience, &teacher, &product, 0.0);
        assert_eq!(table.value(0, a), 3.0);
        assert_eq!(table.count(0, a), 2);
        // Single sample: the mean is that sample's Q-value exactly.
        let experience = ExperienceSet { samples: experience.samples[..1].to_vec(), ..experience };
        let table = distill_values(&experience, &teacher, &product, 0.0);
        assert_eq!(table.value(0, a), 2.0);
        // Unseen keys serve the default.
        assert_eq!(table.value(1, a), 0.0);
    }

    #[test]
    fn mean_times_count_matches_exact_sum() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut teacher = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.95);
        let mut rng = Prng::seed_from_u64(11);
        for i in 0..product.num_states() {
            for a in 0..product.num_actions() {
                teacher.set(i, a, rand::Rng::random_range(&mut rng, -2.0..2.0));
            }
        }
        let experience = collect_teacher_experience(&product, &teacher, 20, &mut rng);
        let table = distill_values(&experience, &teacher, &product, 0.0);
        let counts = transition_counts(&experience);
        for (q, e, count, value) in table.iter() {
            let exact: f64 = experience
                .samples
                .iter()
                .filter(|s| s.state.dfa_state == q && s.event == e)
                .map(|s| teacher.value(product.index(s.state), s.action))
                .sum();
            assert!((value * count as f64 - exact).abs() < 1e-9);
            assert_eq!(counts[&(q, e)], count);
        }
    }

    #[test]
    fn distillation_is_permutation_invariant() {
        let (env, dfa) = chain3_product();
        let product = Product::new(&env, &dfa).unwrap();
        let mut teacher = QTable::new(product.num_states(), product.num_actions(), 0.1, 0.95);
        for i in 0..product.num_states() {
            teacher.set(i, 0, i as f64);
        }
        let mut rng = Prng::seed_from_u64(5);
        let experience = collect_teacher_experience(&product, &teacher, 10, &mut rng);
        let mut reversed = experience.clone();
        reversed.samples.reverse();
        let a = distill_values(&experience, &teacher, &product, 0.0);
        let b = distill_values(&reversed, &teacher, &product, 0.0);
        for (q, e, count, value) in a.iter() {
            assert_eq!(b.count(q, e), count);
            assert!((b.value(q, e) - value).abs() < 1e-12);
        }
    }

    #[test]
    fn table_file_round_trips_exactly() {
        let dfa = bundled_dfa("chain3").unwrap();
        let mut table = TransitionValueTable::new("chain3", 0.0);
        table.insert(0, 1, 3, 1.0 / 3.0);
        table.insert(1, 2, 1, -0.12345678901234567);
        table.insert(0, 0, 7, 2.5);
        let mut buf = Vec::new();
        table.save(&dfa, &mut buf).unwrap();
        let loaded = TransitionValueTable::load(&dfa, buf.as_slice()).unwrap();
        assert_eq!(loaded, table);
    }
}
