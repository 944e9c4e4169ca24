//! Desk-scale convergence check.
//!
//! On a fixture small enough to enumerate every trajectory, preferences
//! consistent with the true (known-reward) return are generated with a
//! margin filter, the tabular reward model is trained to respect them,
//! persistent-exploration Q-learning optimizes against the learned reward,
//! and the greedy policy's true return is compared with the value-iteration
//! optimum. Passing means the preference-trained policy is ε-optimal with
//! respect to the true objective.

use crate::envs::Product;
use crate::harness::{discounted_return, HarnessError};
use crate::learner::{
    greedy_return, value_iteration, EpsilonSchedule, KnownParams, LearnerConfig, QTable,
    RewardSource, Transition,
};
use crate::reward_model::{RewardTable, TrainParams, TrainReport};
use crate::scoring::{outcome_of, Preference};
use rand::SeedableRng;

use crate::envs::Prng;

#[derive(Debug, Clone)]
pub struct ConvergenceCheckConfig {
    /// Allowed gap to the value-iteration optimum.
    pub epsilon: f64,
    /// Minimum true-return difference for a pair to count as a preference.
    pub delta0: f64,
    /// Confidence level carried through to the report (the fixture check is
    /// deterministic; this is informational).
    pub confidence: f64,
    /// Trajectory enumeration horizon.
    pub horizon: usize,
    /// Enumeration overflow guard.
    pub max_trajectories: usize,
    /// Q-learning episodes under the learned reward.
    pub episodes: usize,
    /// Persistent exploration rate.
    pub exploration: f64,
    pub learner: LearnerConfig,
}

impl Default for ConvergenceCheckConfig {
    fn default() -> Self {
        ConvergenceCheckConfig {
            epsilon: 0.05,
            delta0: 0.1,
            confidence: 0.95,
            horizon: 8,
            max_trajectories: 1_000_000,
            episodes: 20_000,
            exploration: 0.1,
            learner: LearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub pass: bool,
    /// No pair survived the delta0 filter: the check is vacuous.
    pub vacuous: bool,
    pub gap: f64,
    pub greedy_value: f64,
    pub optimal_value: f64,
    pub trajectories: usize,
    pub pairs_total: usize,
    pub pairs_used: usize,
    pub training: TrainReport,
    pub epsilon: f64,
    pub delta0: f64,
    pub confidence: f64,
}

impl TheoremReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("convergence desk check\n");
        s.push_str(&format!(
            "trajectories: {}, pairs: {} total / {} after the delta0 = {} filter\n",
            self.trajectories, self.pairs_total, self.pairs_used, self.delta0
        ));
        s.push_str(&format!(
            "reward training: epochs={} loss={:.6} pair_accuracy={:.4}\n",
            self.training.epochs_run, self.training.final_loss, self.training.pair_accuracy
        ));
        s.push_str(&format!(
            "greedy value {:.6} vs optimum {:.6}: gap {:.6} (epsilon {})\n",
            self.greedy_value, self.optimal_value, self.gap, self.epsilon
        ));
        if self.vacuous {
            s.push_str("warning: vacuous pass-filter, no preference pair met delta0\n");
        }
        s.push_str(if self.pass { "PASS\n" } else { "FAIL\n" });
        s
    }
}

/// Runs the check on the given product fixture.
pub fn check_convergence_theorem(
    product: &Product,
    config: &ConvergenceCheckConfig,
    seed: u64,
) -> Result<TheoremReport, HarnessError> {
    let trajectories =
        product.enumerate_trajectories(config.horizon, config.max_trajectories)?;
    let known = RewardSource::Known(KnownParams::default());
    let gamma = config.learner.gamma;
    let true_returns: Vec<f64> = trajectories
        .iter()
        .map(|t| discounted_return(product, t, &known, gamma))
        .collect();

    // Preference pairs with a margin of at least delta0 in true return.
    let n = trajectories.len();
    let mut preferences = Vec::new();
    let mut pairs_total = 0;
    for i in 0..n {
        for j in i + 1..n {
            pairs_total += 1;
            if (true_returns[i] - true_returns[j]).abs() >= config.delta0 {
                preferences.push(Preference {
                    pair: (i, j),
                    scores: (true_returns[i], true_returns[j]),
                    outcome: outcome_of(true_returns[i], true_returns[j]),
                });
            }
        }
    }
    let pairs_used = preferences.len();
    let vacuous = pairs_used == 0;

    // Train the reward model to full pair consistency.
    let mut rng = Prng::seed_from_u64(seed);
    let mut reward_model = RewardTable::zeros(
        product.env.num_states(),
        product.dfa.num_states(),
        product.num_actions(),
        gamma,
        config.learner.margin,
    )?;
    let training = if vacuous {
        TrainReport { epochs_run: 0, final_loss: 0.0, pair_accuracy: 0.0 }
    } else {
        let params = TrainParams {
            epochs: 1000,
            ..config.learner.reward_training
        };
        reward_model.train(&preferences, &trajectories, &params, &mut rng)?
    };

    // Persistent-exploration Q-learning against the learned reward.
    let mut q =
        QTable::new(product.num_states(), product.num_actions(), config.learner.alpha, gamma)
            .with_epsilon(EpsilonSchedule::Constant(config.exploration));
    let horizon = config.horizon.max(product.env.max_steps().min(100));
    let source = RewardSource::Learned(&reward_model);
    for episode in 0..config.episodes {
        let mut ps = product.initial_state();
        let mut steps = 0;
        while steps < horizon && !product.is_terminal(ps) {
            let a = q.epsilon_greedy(product.index(ps), episode, &mut rng);
            let t = Transition::observe(product, ps, a, &mut rng);
            q.q_update(&t, source.eval(product.dfa, &t));
            ps = t.next_state;
            steps += 1;
        }
    }

    // Compare the greedy policy's true return with the optimum.
    let eval_horizon = product.env.max_steps().max(200);
    let greedy_value = greedy_return(product, &q, &known, gamma, eval_horizon)?;
    let oracle = value_iteration(product, &known, gamma, 1e-10)?;
    let optimal_value = oracle.max_value(product.index(product.initial_state()));
    let gap = optimal_value - greedy_value;

    Ok(TheoremReport {
        pass: gap <= config.epsilon,
        vacuous,
        gap,
        greedy_value,
        optimal_value,
        trajectories: n,
        pairs_total,
        pairs_used,
        training,
        epsilon: config.epsilon,
        delta0: config.delta0,
        confidence: config.confidence,
    })
}
