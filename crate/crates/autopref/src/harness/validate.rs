//! Scoring validation: do DFA-derived trajectory scores track trajectory
//! quality and future task-completion potential?
//!
//! A policy is trained on the environment, trajectories of mixed quality are
//! pooled (random behavior, partially trained snapshots, the final policy),
//! and the combined score of each trajectory is correlated against its
//! cumulative reference reward and subgoal count. From each trajectory's
//! endpoint, greedy rollouts measure future success rate and future reward.

use rand::{Rng as _, SeedableRng};

use crate::distill::TransitionValueTable;
use crate::envs::{Prng, Product, Trajectory};
use crate::harness::{cumulative_reward, pearson, spearman, HarnessError, StatsError};
use crate::learner::{
    train_baseline, KnownParams, LearnerConfig, QTable, RewardSource, ShapingParams,
};
use crate::scoring::{subgoals_completed, ScoreWeights, Scorer};

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    /// Size of the mixed-quality trajectory pool.
    pub trajectories: usize,
    /// Greedy rollouts per trajectory endpoint.
    pub rollouts: usize,
    /// Episodes used to train the rollout policy.
    pub training_episodes: usize,
    pub weights: ScoreWeights,
    pub learner: LearnerConfig,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            trajectories: 200,
            rollouts: 50,
            training_episodes: 3000,
            weights: ScoreWeights::default(),
            learner: LearnerConfig::default(),
        }
    }
}

/// Correlations and endpoint statistics; `None` marks an undefined
/// correlation (degenerate variance).
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub pool_size: usize,
    pub score_vs_reward: Option<f64>,
    pub score_vs_subgoals: Option<f64>,
    pub score_vs_future_success: Option<f64>,
    pub score_vs_future_reward: Option<f64>,
    /// Mean future success of the top and bottom halves by score.
    pub above_median_success: f64,
    pub below_median_success: f64,
    pub degenerate_scores: bool,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        fn fmt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".to_string())
        }
        let mut s = String::new();
        s.push_str("scoring validation report\n");
        s.push_str(&format!("trajectories: {}\n", self.pool_size));
        s.push_str(&format!("pearson(score, cumulative reference reward): {}\n", fmt(self.score_vs_reward)));
        s.push_str(&format!("spearman(score, subgoals completed): {}\n", fmt(self.score_vs_subgoals)));
        s.push_str(&format!("pearson(score, future success rate): {}\n", fmt(self.score_vs_future_success)));
        s.push_str(&format!("pearson(score, future reward): {}\n", fmt(self.score_vs_future_reward)));
        s.push_str(&format!(
            "future success, above-median scores: {:.3} vs below-median: {:.3}\n",
            self.above_median_success, self.below_median_success
        ));
        if self.degenerate_scores {
            s.push_str("warning: scores are degenerate (all equal); correlations undefined\n");
        }
        s
    }
}

fn correlation(result: Result<f64, StatsError>) -> Result<Option<f64>, HarnessError> {
    match result {
        Ok(r) => Ok(Some(r)),
        Err(StatsError::ZeroVariance) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Runs the validation analysis. The rollout policy is trained internally
/// with minimal DFA shaping; `values` feeds the combined score.
pub fn validate_scoring(
    product: &Product,
    values: &TransitionValueTable,
    config: &ValidationConfig,
    seed: u64,
) -> Result<ValidationReport, HarnessError> {
    let horizon = product.env.max_steps();
    let learner = LearnerConfig {
        episodes: config.training_episodes,
        ..config.learner.clone()
    };
    let snapshots_at = [config.training_episodes / 4, config.training_episodes / 2];
    let run = train_baseline(
        product,
        &RewardSource::DistillShaping(ShapingParams::default()),
        &learner,
        seed,
        &snapshots_at,
    )?;
    let policy = run.policy;
    let snapshots = run.snapshots;

    // Mixed-quality pool: one third random, one third partial snapshots,
    // one third the final policy (with light exploration noise).
    let mut rng = Prng::seed_from_u64(seed ^ 0x5eed_0001);
    let n = config.trajectories;
    let mut pool: Vec<Trajectory> = Vec::with_capacity(n);
    let n_actions = product.num_actions();
    for i in 0..n {
        let t = match i % 3 {
            0 => product.rollout(|_, r: &mut Prng| r.random_range(0..n_actions), &mut rng, horizon)?,
            1 => {
                let snapshot = &snapshots[i % snapshots.len().max(1)];
                rollout_with(product, snapshot, 0.2, &mut rng, horizon)?
            }
            _ => rollout_with(product, &policy, 0.05, &mut rng, horizon)?,
        };
        pool.push(t);
    }

    let scorer = Scorer::combined(config.weights, values, product)?;
    let scores: Vec<f64> = pool.iter().map(|t| scorer.score(t, product)).collect();
    let known = RewardSource::Known(KnownParams::default());
    let rewards: Vec<f64> = pool.iter().map(|t| cumulative_reward(product, t, &known)).collect();
    let subgoals: Vec<f64> =
        pool.iter().map(|t| subgoals_completed(t, product) as f64).collect();

    // Endpoint analysis: greedy rollouts from each trajectory's final state.
    let mut future_success = Vec::with_capacity(n);
    let mut future_reward = Vec::with_capacity(n);
    for t in &pool {
        let mut successes = 0usize;
        let mut reward_sum = 0.0;
        for _ in 0..config.rollouts {
            let mut greedy =
                |ps: crate::envs::ProductState, _: &mut Prng| policy.greedy_action_with_tol(product.index(ps), 1e-9);
            let end = t.final_state();
            let future = if product.is_terminal(end) {
                Trajectory { start: end, steps: Vec::new(), terminal_accepted: true }
            } else {
                product.rollout_from(end, &mut greedy, &mut rng, horizon)?
            };
            if future.terminal_accepted {
                successes += 1;
            }
            reward_sum += cumulative_reward(product, &future, &known);
        }
        future_success.push(successes as f64 / config.rollouts.max(1) as f64);
        future_reward.push(reward_sum / config.rollouts.max(1) as f64);
    }

    // Median split of endpoint success by score: sort indices by score and
    // compare the top half against the bottom half.
    let mut by_score: Vec<usize> = (0..n).collect();
    by_score.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let half = n / 2;
    let mean = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().map(|&i| future_success[i]).sum::<f64>() / idx.len() as f64
    };
    let below = mean(&by_score[..half]);
    let above = mean(&by_score[half..]);

    let degenerate = scores.windows(2).all(|w| w[0] == w[1]);
    Ok(ValidationReport {
        pool_size: n,
        score_vs_reward: correlation(pearson(&scores, &rewards))?,
        score_vs_subgoals: correlation(spearman(&scores, &subgoals))?,
        score_vs_future_success: correlation(pearson(&scores, &future_success))?,
        score_vs_future_reward: correlation(pearson(&scores, &future_reward))?,
        above_median_success: above,
        below_median_success: below,
        degenerate_scores: degenerate,
    })
}

fn rollout_with(
    product: &Product,
    q: &QTable,
    epsilon: f64,
    rng: &mut Prng,
    horizon: usize,
) -> Result<Trajectory, HarnessError> {
    let mut policy =
        |ps: crate::envs::ProductState, r: &mut Prng| q.epsilon_greedy_with(product.index(ps), epsilon, r);
    Ok(product.rollout_from(product.initial_state(), &mut policy, rng, horizon)?)
}
