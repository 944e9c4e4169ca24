//! Training loops: the static and dynamic preference-based variants and the
//! plain Q-learning loop the numeric baselines use.
//!
//! Metrics are always accrued under the hand-crafted known reward so that
//! methods trained on different reward definitions stay comparable on one
//! axis.

use rand::{Rng as _, SeedableRng};

use crate::distill::TransitionValueTable;
use crate::envs::{Prng, Product, Trajectory};
use crate::harness::EpisodeMetrics;
use crate::learner::{
    AnnealConfig, EpsilonSchedule, KnownParams, LearnerError, QTable, RewardSource, Transition,
};
use crate::reward_model::{RewardTable, TrainParams, TrainReport};
use crate::scoring::{generate_preferences, PairingPolicy, Preference, Scorer};

/// Q-learning and reward-model hyperparameters shared by every method.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which epsilon anneals linearly.
    pub epsilon_fraction: f64,
    /// Q-learning episodes (per block, for the dynamic variant).
    pub episodes: usize,
    /// Random trajectories collected for the static preference phase.
    pub initial_trajectories: usize,
    /// Episode horizon override; the environment's default otherwise.
    pub horizon: Option<usize>,
    pub reward_training: TrainParams,
    pub margin: f64,
    /// Teacher-blend decay for annealed updates.
    pub rho: f64,
    pub pairing: PairingPolicy,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.1,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.6,
            episodes: 3000,
            initial_trajectories: 200,
            horizon: None,
            reward_training: TrainParams::default(),
            margin: 1.0,
            rho: 0.9,
            pairing: PairingPolicy::default(),
        }
    }
}

impl LearnerConfig {
    fn schedule(&self, total_episodes: usize) -> EpsilonSchedule {
        EpsilonSchedule::Linear {
            start: self.epsilon_start,
            end: self.epsilon_end,
            fraction: self.epsilon_fraction,
            total_episodes,
        }
    }

    fn horizon_for(&self, product: &Product) -> usize {
        self.horizon.unwrap_or_else(|| product.env.max_steps())
    }
}

/// Extra knobs of the dynamic variant.
#[derive(Debug, Clone)]
pub struct DynamicConfig {
    /// Maximum refinement iterations.
    pub max_iterations: usize,
    /// Q-learning episodes per iteration.
    pub block_episodes: usize,
    /// Moving-average window (in blocks) for the stability stop.
    pub stability_window: usize,
    /// Stop once the moving-average block return changes less than this.
    pub stability_tol: f64,
    /// On-policy trajectories collected per iteration.
    pub trajectories_per_iteration: usize,
    /// Preference buffer capacity; oldest pairs are dropped beyond it.
    pub buffer_capacity: usize,
    /// Reward-model epochs per iteration (on the whole buffer).
    pub epochs_per_iteration: usize,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        DynamicConfig {
            max_iterations: 15,
            block_episodes: 200,
            stability_window: 3,
            stability_tol: 0.01,
            trajectories_per_iteration: 30,
            buffer_capacity: 3000,
            epochs_per_iteration: 5,
        }
    }
}

/// Result of a static run.
#[derive(Debug, Clone)]
pub struct StaticRun {
    pub policy: QTable,
    pub reward_model: RewardTable,
    pub training: TrainReport,
    pub metrics: Vec<EpisodeMetrics>,
}

/// Result of a dynamic run.
#[derive(Debug, Clone)]
pub struct DynamicRun {
    pub policy: QTable,
    pub reward_model: RewardTable,
    pub metrics: Vec<EpisodeMetrics>,
    pub iterations_run: usize,
    pub stopped_early: bool,
}

/// Result of a baseline run.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub policy: QTable,
    pub metrics: Vec<EpisodeMetrics>,
    /// Snapshots taken at the requested episode indices.
    pub snapshots: Vec<QTable>,
}

/// Runs one Q-learning episode, updating `q` in place and returning the
/// episode metrics entry.
fn run_episode(
    product: &Product,
    q: &mut QTable,
    training_reward: &RewardSource,
    reference: &RewardSource,
    episode: usize,
    horizon: usize,
    cumulative_steps: &mut u64,
    anneal: Option<(&mut AnnealConfig, &TransitionValueTable)>,
    rng: &mut Prng,
) -> Result<EpisodeMetrics, LearnerError> {
    let mut ps = product.initial_state();
    let mut steps = 0;
    let mut reference_reward = 0.0;
    let mut anneal = anneal;
    while steps < horizon && !product.is_terminal(ps) {
        let a = q.epsilon_greedy(product.index(ps), episode, rng);
        let t = Transition::observe(product, ps, a, rng);
        let r = training_reward.eval(product.dfa, &t);
        if !r.is_finite() {
            return Err(LearnerError::NonFiniteReward);
        }
        match anneal.as_mut() {
            Some((config, teacher)) => q.annealed_update(&t, r, config, teacher),
            None => q.q_update(&t, r),
        }
        reference_reward += reference.eval(product.dfa, &t);
        ps = t.next_state;
        steps += 1;
    }
    *cumulative_steps += steps as u64;
    Ok(EpisodeMetrics {
        episode,
        steps,
        cumulative_steps: *cumulative_steps,
        reference_reward,
        accepted: product.is_terminal(ps),
    })
}

/// Trains plain Q-learning under a fixed reward source. `snapshot_at` lists
/// episode indices (before which) a copy of the Q-table is stored.
pub fn train_baseline(
    product: &Product,
    source: &RewardSource,
    config: &LearnerConfig,
    seed: u64,
    snapshot_at: &[usize],
) -> Result<BaselineRun, LearnerError> {
    let mut rng = Prng::seed_from_u64(seed);
    let horizon = config.horizon_for(product);
    let mut q = QTable::new(product.num_states(), product.num_actions(), config.alpha, config.gamma)
        .with_epsilon(config.schedule(config.episodes));
    let reference = RewardSource::Known(KnownParams::default());
    let mut metrics = Vec::with_capacity(config.episodes);
    let mut snapshots = Vec::new();
    let mut cumulative_steps = 0;
    for episode in 0..config.episodes {
        if snapshot_at.contains(&episode) {
            snapshots.push(q.clone());
        }
        metrics.push(run_episode(
            product,
            &mut q,
            source,
            &reference,
            episode,
            horizon,
            &mut cumulative_steps,
            None,
            &mut rng,
        )?);
    }
    Ok(BaselineRun { policy: q, metrics, snapshots })
}

/// The static variant: collect random trajectories, learn the reward model
/// once from their preferences, then optimize the policy against the frozen
/// learned reward. An annealing teacher table switches the Q-update to the
/// teacher-blended form.
pub fn run_static(
    product: &Product,
    scorer: &Scorer,
    config: &LearnerConfig,
    anneal_teacher: Option<&TransitionValueTable>,
    seed: u64,
) -> Result<StaticRun, LearnerError> {
    let mut rng = Prng::seed_from_u64(seed);
    let horizon = config.horizon_for(product);

    // Phase 1: preferences from random behavior, one reward fit.
    let mut trajectories = Vec::with_capacity(config.initial_trajectories);
    for _ in 0..config.initial_trajectories {
        let n = product.num_actions();
        trajectories.push(product.rollout(|_, r: &mut Prng| r.random_range(0..n), &mut rng, horizon)?);
    }
    let preferences =
        generate_preferences(&trajectories, scorer, product, &config.pairing, &mut rng)?;
    let mut reward_model = RewardTable::zeros(
        product.env.num_states(),
        product.dfa.num_states(),
        product.num_actions(),
        config.gamma,
        config.margin,
    )?;
    let training =
        reward_model.train(&preferences, &trajectories, &config.reward_training, &mut rng)?;

    // Phase 2: Q-learning against the frozen learned reward.
    let mut q = QTable::new(product.num_states(), product.num_actions(), config.alpha, config.gamma)
        .with_epsilon(config.schedule(config.episodes));
    let reference = RewardSource::Known(KnownParams::default());
    let mut anneal = match anneal_teacher {
        Some(_) => Some(AnnealConfig::new(config.rho, product.dfa)?),
        None => None,
    };
    let mut metrics = Vec::with_capacity(config.episodes);
    let mut cumulative_steps = 0;
    for episode in 0..config.episodes {
        let source = RewardSource::Learned(&reward_model);
        metrics.push(run_episode(
            product,
            &mut q,
            &source,
            &reference,
            episode,
            horizon,
            &mut cumulative_steps,
            anneal.as_mut().map(|c| (c, anneal_teacher.unwrap())),
            &mut rng,
        )?);
    }
    Ok(StaticRun { policy: q, reward_model, training, metrics })
}

/// The dynamic variant: iteratively collect trajectories under the current
/// policy, extend the preference buffer, continue reward-model training, and
/// run a block of Q-learning episodes; stops early once the moving-average
/// block return stabilizes.
pub fn run_dynamic(
    product: &Product,
    scorer: &Scorer,
    config: &LearnerConfig,
    dynamic: &DynamicConfig,
    anneal_teacher: Option<&TransitionValueTable>,
    seed: u64,
) -> Result<DynamicRun, LearnerError> {
    let mut rng = Prng::seed_from_u64(seed);
    let horizon = config.horizon_for(product);
    let total_episodes = dynamic.max_iterations * dynamic.block_episodes;

    let mut reward_model = RewardTable::zeros(
        product.env.num_states(),
        product.dfa.num_states(),
        product.num_actions(),
        config.gamma,
        config.margin,
    )?;
    let mut q = QTable::new(product.num_states(), product.num_actions(), config.alpha, config.gamma)
        .with_epsilon(config.schedule(total_episodes));
    let reference = RewardSource::Known(KnownParams::default());
    let mut anneal = match anneal_teacher {
        Some(_) => Some(AnnealConfig::new(config.rho, product.dfa)?),
        None => None,
    };

    let mut all_trajectories: Vec<Trajectory> = Vec::new();
    let mut buffer: Vec<Preference> = Vec::new();
    let mut metrics = Vec::new();
    let mut cumulative_steps = 0;
    let mut episode = 0;
    let mut previous_average = 0.0;
    let mut iterations_run = 0;
    let mut stopped_early = false;
    let mut block_means: Vec<f64> = Vec::new();

    for _ in 0..dynamic.max_iterations {
        iterations_run += 1;

        // Collect on-policy trajectories under the current exploration rate.
        let offset = all_trajectories.len();
        let batch_start = all_trajectories.len();
        for _ in 0..dynamic.trajectories_per_iteration {
            let t = product.rollout(
                |ps, r: &mut Prng| q.epsilon_greedy(product.index(ps), episode, r),
                &mut rng,
                horizon,
            )?;
            all_trajectories.push(t);
        }
        let batch = &all_trajectories[batch_start..];
        if batch.len() >= 2 {
            let mut new_prefs =
                generate_preferences(batch, scorer, product, &config.pairing, &mut rng)?;
            for p in &mut new_prefs {
                p.pair = (p.pair.0 + offset, p.pair.1 + offset);
            }
            buffer.extend(new_prefs);
        }
        if buffer.len() > dynamic.buffer_capacity {
            buffer.drain(..buffer.len() - dynamic.buffer_capacity);
        }

        // Continue reward-model training on the whole buffer.
        if !buffer.is_empty() {
            let params = TrainParams {
                epochs: dynamic.epochs_per_iteration,
                ..config.reward_training
            };
            reward_model.train(&buffer, &all_trajectories, &params, &mut rng)?;
        }

        // A block of Q-learning under the refreshed reward.
        let mut block_total = 0.0;
        for _ in 0..dynamic.block_episodes {
            let source = RewardSource::Learned(&reward_model);
            let entry = run_episode(
                product,
                &mut q,
                &source,
                &reference,
                episode,
                horizon,
                &mut cumulative_steps,
                anneal.as_mut().map(|c| (c, anneal_teacher.unwrap())),
                &mut rng,
            )?;
            block_total += entry.reference_reward;
            metrics.push(entry);
            episode += 1;
        }
        block_means.push(block_total / dynamic.block_episodes.max(1) as f64);

        // Stability stop on the moving average of recent block returns.
        let window = dynamic.stability_window.min(block_means.len());
        let moving_average =
            block_means[block_means.len() - window..].iter().sum::<f64>() / window as f64;
        if (moving_average - previous_average).abs() < dynamic.stability_tol {
            stopped_early = iterations_run < dynamic.max_iterations;
            break;
        }
        previous_average = moving_average;
    }

    Ok(DynamicRun {
        policy: q,
        reward_model,
        metrics,
        iterations_run,
        stopped_early,
    })
}
