//! Tabular reward model trained from trajectory preferences.
//!
//! The reward is a table over `(env state, DFA state, action)`. A
//! trajectory's return is the discounted sum of its step rewards; training
//! minimizes the pairwise hinge ranking loss
//! `sum(max(0, margin - (return(preferred) - return(other))))` by per-pair
//! subgradient descent. For the finite product MDPs in this crate the table
//! is exact: any preference ordering realizable by a trajectory-return
//! function is representable.

use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::envs::{Prng, Trajectory};
use crate::scoring::Preference;

#[derive(Debug, Error)]
pub enum RewardModelError {
    #[error("gamma must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("margin must be positive, got {0}")]
    BadMargin(f64),
    #[error("training produced a non-finite loss (learning rate too large?)")]
    Diverged,
    #[error("training needs at least one non-indifferent preference")]
    NoPreferences,
    #[error("snapshot line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Learnable reward parameters over `(env state, DFA state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    theta: Vec<f64>,
    n_env: usize,
    n_dfa: usize,
    n_actions: usize,
    pub gamma: f64,
    pub margin: f64,
}

/// Subgradient training parameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Optional ℓ2 decay per epoch; 0 disables it.
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { learning_rate: 0.05, epochs: 50, l2: 0.0 }
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_loss: f64,
    /// Fraction of training pairs whose preferred trajectory has the
    /// strictly higher return.
    pub pair_accuracy: f64,
}

impl RewardTable {
    /// All-zero table.
    pub fn zeros(
        n_env: usize,
        n_dfa: usize,
        n_actions: usize,
        gamma: f64,
        margin: f64,
    ) -> Result<Self, RewardModelError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(RewardModelError::BadGamma(gamma));
        }
        if !(margin > 0.0) {
            return Err(RewardModelError::BadMargin(margin));
        }
        Ok(RewardTable {
            theta: vec![0.0; n_env * n_dfa * n_actions],
            n_env,
            n_dfa,
            n_actions,
            gamma,
            margin,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_env, self.n_dfa, self.n_actions)
    }

    fn flat(&self, s: usize, q: usize, a: usize) -> usize {
        (s * self.n_dfa + q) * self.n_actions + a
    }

    /// Reward lookup. Out-of-range indices are a usage fault and panic; see
    /// [`RewardTable::get`] for the checked variant.
    pub fn reward(&self, s: usize, q: usize, a: usize) -> f64 {
        assert!(
            s < self.n_env && q < self.n_dfa && a < self.n_actions,
            "reward index ({s},{q},{a}) out of range {:?}",
            self.dims()
        );
        self.theta[self.flat(s, q, a)]
    }

    pub fn get(&self, s: usize, q: usize, a: usize) -> Option<f64> {
        if s < self.n_env && q < self.n_dfa && a < self.n_actions {
            Some(self.theta[self.flat(s, q, a)])
        } else {
            None
        }
    }

    pub fn set(&mut self, s: usize, q: usize, a: usize, value: f64) {
        let i = self.flat(s, q, a);
        self.theta[i] = value;
    }

    /// Reward indexed by product-state index (`env_state * |Q| + dfa_state`).
    pub fn reward_at(&self, product_index: usize, a: usize) -> f64 {
        self.theta[product_index * self.n_actions + a]
    }

    /// Discounted return of a trajectory under the current parameters.
    pub fn trajectory_return(&self, trajectory: &Trajectory) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for step in &trajectory.steps {
            total += discount * self.reward(step.env_state, step.dfa_state, step.action);
            discount *= self.gamma;
        }
        total
    }

    /// Pairwise hinge ranking loss over ordered `(preferred, other)` pairs.
    pub fn ranking_loss(&self, pairs: &[(usize, usize)], trajectories: &[Trajectory]) -> f64 {
        pairs
            .iter()
            .map(|&(p, n)| {
                let gap = self.trajectory_return(&trajectories[p])
                    - self.trajectory_return(&trajectories[n]);
                (self.margin - gap).max(0.0)
            })
            .sum()
    }

    /// Per-pair subgradient descent on the ranking loss. Pairs are visited
    /// in a freshly shuffled order each epoch; training stops early once the
    /// loss reaches zero. Indifferent preferences are ignored.
    pub fn train(
        &mut self,
        preferences: &[Preference],
        trajectories: &[Trajectory],
        params: &TrainParams,
        rng: &mut Prng,
    ) -> Result<TrainReport, RewardModelError> {
        let mut pairs: Vec<(usize, usize)> =
            preferences.iter().filter_map(|p| p.ordered()).collect();
        if pairs.is_empty() {
            return Err(RewardModelError::NoPreferences);
        }
        let features: Vec<Vec<(usize, f64)>> =
            trajectories.iter().map(|t| self.features(t)).collect();
        let dot = |theta: &[f64], feat: &[(usize, f64)]| -> f64 {
            feat.iter().map(|&(i, w)| theta[i] * w).sum()
        };

        let mut epochs_run = 0;
        for _ in 0..params.epochs {
            pairs.shuffle(rng);
            for &(p, n) in &pairs {
                let gap = dot(&self.theta, &features[p]) - dot(&self.theta, &features[n]);
                if self.margin - gap > 0.0 {
                    for &(i, w) in &features[p] {
                        self.theta[i] += params.learning_rate * w;
                    }
                    for &(i, w) in &features[n] {
                        self.theta[i] -= params.learning_rate * w;
                    }
                }
            }
            if params.l2 > 0.0 {
                let decay = 1.0 - params.learning_rate * params.l2;
                for v in &mut self.theta {
                    *v *= decay;
                }
            }
            epochs_run += 1;
            let loss = self.ranking_loss(&pairs, trajectories);
            if !loss.is_finite() {
                return Err(RewardModelError::Diverged);
            }
            // With l2 active the regularized objective keeps improving past
            // the first zero-loss point (decay cleans up stale weights), so
            // only stop early in the unregularized case.
            if loss == 0.0 && params.l2 == 0.0 {
                break;
            }
        }

        let final_loss = self.ranking_loss(&pairs, trajectories);
        let correct = pairs
            .iter()
            .filter(|&&(p, n)| {
                self.trajectory_return(&trajectories[p]) > self.trajectory_return(&trajectories[n])
            })
            .count();
        Ok(TrainReport {
            epochs_run,
            final_loss,
            pair_accuracy: correct as f64 / pairs.len() as f64,
        })
    }

    /// Sparse discounted feature vector of a trajectory: the table indices
    /// it touches with their `gamma^t` weights, summed over repeat visits.
    fn features(&self, trajectory: &Trajectory) -> Vec<(usize, f64)> {
        let mut feat: Vec<(usize, f64)> = Vec::with_capacity(trajectory.len());
        let mut discount = 1.0;
        for step in &trajectory.steps {
            feat.push((self.flat(step.env_state, step.dfa_state, step.action), discount));
            discount *= self.gamma;
        }
        feat.sort_unstable_by_key(|&(i, _)| i);
        feat.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        feat
    }

    /// Writes the snapshot format: a header recording gamma, margin, and
    /// dimensions, then one `env_state dfa_state action value` line per
    /// non-zero entry. Values round-trip exactly.
    pub fn save<W: Write>(&self, mut out: W) -> Result<(), RewardModelError> {
        writeln!(out, "autopref reward v1")?;
        writeln!(out, "gamma {}", self.gamma)?;
        writeln!(out, "margin {}", self.margin)?;
        writeln!(out, "dims {} {} {}", self.n_env, self.n_dfa, self.n_actions)?;
        for s in 0..self.n_env {
            for q in 0..self.n_dfa {
                for a in 0..self.n_actions {
                    let v = self.theta[self.flat(s, q, a)];
                    if v != 0.0 {
                        writeln!(out, "{s} {q} {a} {v}")?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses the snapshot format written by [`RewardTable::save`].
    pub fn load<R: Read>(reader: R) -> Result<Self, RewardModelError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut expect = |want: &str| -> Result<String, RewardModelError> {
            match lines.next() {
                Some((i, line)) => {
                    let line = line?;
                    line.strip_prefix(want).map(|r| r.trim().to_string()).ok_or_else(|| {
                        RewardModelError::Format {
                            line: i + 1,
                            msg: format!("expected `{want}...`, found `{line}`"),
                        }
                    })
                }
                None => {
                    Err(RewardModelError::Format { line: 0, msg: "unexpected end of file".into() })
                }
            }
        };
        expect("autopref reward v1")?;
        let gamma: f64 = expect("gamma ")?
            .parse()
            .map_err(|e| RewardModelError::Format { line: 2, msg: format!("bad gamma: {e}") })?;
        let margin: f64 = expect("margin ")?
            .parse()
            .map_err(|e| RewardModelError::Format { line: 3, msg: format!("bad margin: {e}") })?;
        let dims = expect("dims ")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| RewardModelError::Format { line: 4, msg: format!("bad dims: {e}") })?;
        if dims.len() != 3 {
            return Err(RewardModelError::Format { line: 4, msg: "dims needs 3 fields".into() });
        }
        let mut table = RewardTable::zeros(dims[0], dims[1], dims[2], gamma, margin)?;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(RewardModelError::Format {
                    line: i + 1,
                    msg: "expected `s q a value`".to_string(),
                });
            }
            let idx: Vec<usize> = parts[..3]
                .iter()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| RewardModelError::Format { line: i + 1, msg: format!("{e}") })?;
            let value: f64 = parts[3]
                .parse()
                .map_err(|e| RewardModelError::Format { line: i + 1, msg: format!("{e}") })?;
            if table.get(idx[0], idx[1], idx[2]).is_none() {
                return Err(RewardModelError::Format {
                    line: i + 1,
                    msg: format!("index ({},{},{}) out of range", idx[0], idx[1], idx[2]),
                });
            }
            table.set(idx[0], idx[1], idx[2], value);
        }
        Ok(table)
    }
}
