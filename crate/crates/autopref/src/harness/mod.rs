//! Experiment orchestration: configuration, seeded multi-run execution,
//! metrics CSV emission, scoring validation, and the convergence desk check.

use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use crate::automaton::{parse_dfa, Dfa, DfaParseError};
use crate::distill::{DistillError, TransitionValueTable};
use crate::envs::{make_env, ActionId, Env, EnvError, EnvParams, Product, Trajectory};
use crate::learner::{
    run_dynamic, run_static, train_baseline, KnownParams, LearnerError, LpoplShaping,
    RewardSource, RmParams, ShapingParams, Transition,
};
use crate::reward_model::RewardModelError;
use crate::scoring::{Scorer, ScoringError};

mod config;
mod metrics;
mod stats;
mod theorem;
mod validate;

pub use config::{ExperimentConfig, Method};
pub use metrics::{
    aggregate, read_csv, reward_per_cumulative_steps, write_aggregate_csv, write_csv,
    AggregateRow, EpisodeMetrics, AGGREGATE_HEADER, CSV_HEADER,
};
pub use stats::{pearson, ranks, spearman, StatsError};
pub use theorem::{check_convergence_theorem, ConvergenceCheckConfig, TheoremReport};
pub use validate::{validate_scoring, ValidationConfig, ValidationReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("metrics csv, line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("seed runs have mismatched episode counts")]
    MismatchedRuns,
    #[error("run failed for seed {seed}: {source}")]
    SeedFailed {
        seed: u64,
        #[source]
        source: LearnerError,
    },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    RewardModel(#[from] RewardModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dfa(#[from] DfaParseError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rebuilds the [`Transition`] view of a recorded trajectory step.
pub fn transition_of_step(product: &Product, step: &crate::envs::TrajStep) -> Transition {
    Transition {
        state: crate::envs::ProductState {
            env_state: step.env_state,
            dfa_state: step.dfa_state,
        },
        action: step.action,
        next_state: crate::envs::ProductState {
            env_state: step.next_env_state,
            dfa_state: step.next_dfa_state,
        },
        event: step.event,
        terminal: product.dfa.is_accepting(step.next_dfa_state),
        state_index: step.env_state * product.dfa.num_states() + step.dfa_state,
        next_state_index: step.next_env_state * product.dfa.num_states() + step.next_dfa_state,
    }
}

/// Undiscounted cumulative reward of a trajectory under a reward source.
pub fn cumulative_reward(product: &Product, trajectory: &Trajectory, source: &RewardSource) -> f64 {
    trajectory
        .steps
        .iter()
        .map(|s| source.eval(product.dfa, &transition_of_step(product, s)))
        .sum()
}

/// Discounted return of a trajectory under a reward source.
pub fn discounted_return(
    product: &Product,
    trajectory: &Trajectory,
    source: &RewardSource,
    gamma: f64,
) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for s in &trajectory.steps {
        total += discount * source.eval(product.dfa, &transition_of_step(product, s));
        discount *= gamma;
    }
    total
}

/// Builds the numeric reward source for a baseline method.
pub fn baseline_source<'a>(method: Method, dfa: &Dfa, gamma: f64) -> Result<RewardSource<'a>, HarnessError> {
    Ok(match method {
        Method::Known => RewardSource::Known(KnownParams::default()),
        Method::RewardMachine => RewardSource::RewardMachine(RmParams::default()),
        Method::Lpopl => RewardSource::Lpopl(LpoplShaping::new(dfa, gamma)?),
        Method::DistillShaping => RewardSource::DistillShaping(ShapingParams::default()),
        other => {
            return Err(HarnessError::Config(format!(
                "`{}` is not a numeric baseline",
                other.name()
            )))
        }
    })
}

/// Per-seed outcome of an experiment.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub csv_path: PathBuf,
    pub episodes: usize,
    pub total_steps: u64,
    /// Acceptance rate over the final 200 episodes (or all, if fewer).
    pub final_acceptance: f64,
}

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub env: String,
    pub method: Method,
    pub outcomes: Vec<SeedOutcome>,
    pub aggregate_path: PathBuf,
    pub summary_path: PathBuf,
}

fn final_acceptance(metrics: &[EpisodeMetrics], window: usize) -> f64 {
    if metrics.is_empty() {
        return 0.0;
    }
    let tail = &metrics[metrics.len().saturating_sub(window)..];
    tail.iter().filter(|m| m.accepted).count() as f64 / tail.len() as f64
}

/// Runs one seed of the configured method and returns its metrics stream.
pub fn run_seed(
    product: &Product,
    config: &ExperimentConfig,
    values: Option<&TransitionValueTable>,
    seed: u64,
) -> Result<Vec<EpisodeMetrics>, HarnessError> {
    let scorer = match values {
        Some(v) if config.weights.transition_value > 0.0 => {
            Scorer::combined(config.weights, v, product)?
        }
        _ => Scorer::subtask(config.weights, product)?,
    };
    let planning = config.method.uses_planning_values();
    let teacher = if planning { values } else { None };
    let metrics = match config.method {
        Method::Static | Method::StaticPrefPlan => {
            run_static(product, &scorer, &config.learner, teacher, seed)
                .map_err(|source| HarnessError::SeedFailed { seed, source })?
                .metrics
        }
        Method::Dynamic | Method::DynamicPrefPlan => {
            run_dynamic(product, &scorer, &config.learner, &config.dynamic, teacher, seed)
                .map_err(|source| HarnessError::SeedFailed { seed, source })?
                .metrics
        }
        baseline => {
            let source = baseline_source(baseline, product.dfa, config.learner.gamma)?;
            train_baseline(product, &source, &config.learner, seed, &[])
                .map_err(|source| HarnessError::SeedFailed { seed, source })?
                .metrics
        }
    };
    Ok(metrics)
}

/// Runs the full experiment: one metrics CSV per seed, a per-method
/// aggregate CSV, and a plain-text summary. Outputs are deterministic
/// functions of `(config, seed)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    let env: Env = make_env(&config.env, &EnvParams { horizon: config.horizon })?;
    let dfa: Dfa = match &config.dfa_path {
        Some(path) => parse_dfa(&fs::read_to_string(path)?)?,
        None => crate::envs::bundled_dfa(&config.env)?,
    };
    let product = Product::new(&env, &dfa)?;
    let values: Option<TransitionValueTable> = match &config.transition_values {
        Some(path) => Some(TransitionValueTable::load(&dfa, fs::File::open(path)?)?),
        None => None,
    };

    fs::create_dir_all(&config.out_dir)?;
    let mut outcomes = Vec::new();
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let metrics = match run_seed(&product, config, values.as_ref(), seed) {
            Ok(m) => m,
            Err(e) => {
                // Flag the partial output before surfacing the failure.
                let summary_path = config.out_dir.join("summary.txt");
                let _ = fs::write(
                    &summary_path,
                    format!("autopref experiment summary\nstatus: FAILED at seed {seed}: {e}\n"),
                );
                return Err(e);
            }
        };
        let csv_path =
            config.out_dir.join(format!("{}_seed{}.csv", config.method.name(), seed));
        let mut buf = Vec::new();
        write_csv(&metrics, &mut buf)?;
        fs::write(&csv_path, &buf)?;
        outcomes.push(SeedOutcome {
            seed,
            csv_path,
            episodes: metrics.len(),
            total_steps: metrics.last().map(|m| m.cumulative_steps).unwrap_or(0),
            final_acceptance: final_acceptance(&metrics, 200),
        });
        runs.push(metrics);
    }

    let aggregate_path = config.out_dir.join(format!("{}_aggregate.csv", config.method.name()));
    let rows = aggregate(&runs)?;
    let mut buf = Vec::new();
    write_aggregate_csv(&rows, &mut buf)?;
    fs::write(&aggregate_path, &buf)?;

    let summary_path = config.out_dir.join("summary.txt");
    let mut text = String::new();
    text.push_str("autopref experiment summary\n");
    text.push_str(
        "reference reward: the hand-crafted `known` reward; every method is measured on this axis\n",
    );
    text.push_str(&format!("env: {}\n", config.env));
    text.push_str(&format!("method: {}\n", config.method.name()));
    text.push_str(&format!(
        "seeds: {}\n",
        config.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    ));
    for o in &outcomes {
        text.push_str(&format!(
            "seed {}: episodes={} total_steps={} final_200_acceptance={:.3}\n",
            o.seed, o.episodes, o.total_steps, o.final_acceptance
        ));
    }
    fs::write(&summary_path, &text)?;

    Ok(ExperimentSummary {
        env: config.env.clone(),
        method: config.method,
        outcomes,
        aggregate_path,
        summary_path,
    })
}

/// A greedy-policy closure over a Q-table, with stable tie-breaking.
pub fn greedy_policy_fn<'a>(
    product: &'a Product<'a>,
    q: &'a crate::learner::QTable,
) -> impl FnMut(crate::envs::ProductState, &mut crate::envs::Prng) -> ActionId + 'a {
    move |ps, _rng| q.greedy_action_with_tol(product.index(ps), 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_outputs_are_byte_identical_across_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::default();
        config.env = "chain3".to_string();
        config.method = Method::Known;
        config.seeds = vec![0, 1];
        config.learner.episodes = 50;
        config.horizon = Some(25);
        config.out_dir = dir.path().join("a");
        let first = run_experiment(&config).unwrap();
        config.out_dir = dir.path().join("b");
        let second = run_experiment(&config).unwrap();

        for (x, y) in first.outcomes.iter().zip(&second.outcomes) {
            let a = fs::read(&x.csv_path).unwrap();
            let b = fs::read(&y.csv_path).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b);
        }
        assert_eq!(
            fs::read(&first.aggregate_path).unwrap(),
            fs::read(&second.aggregate_path).unwrap()
        );
        let summary = fs::read_to_string(&first.summary_path).unwrap();
        assert!(summary.contains("reference reward"));
    }

    #[test]
    fn chain3_known_reward_accepts_in_the_tail() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::default();
        config.env = "chain3".to_string();
        config.method = Method::Known;
        config.seeds = vec![7];
        config.learner.episodes = 400;
        config.horizon = Some(30);
        config.out_dir = dir.path().to_path_buf();
        let summary = run_experiment(&config).unwrap();
        let metrics = read_csv(fs::File::open(&summary.outcomes[0].csv_path).unwrap()).unwrap();
        let tail = &metrics[metrics.len() - 100..];
        assert!(tail.iter().all(|m| m.accepted), "final episodes should all accept");
    }

    #[test]
    fn empty_seed_list_is_a_config_error() {
        let mut config = ExperimentConfig::default();
        config.seeds.clear();
        assert!(matches!(run_experiment(&config), Err(HarnessError::Config(_))));
    }

    #[test]
    fn csv_schema_is_stable() {
        assert_eq!(CSV_HEADER, "episode,steps,cumulative_steps,reference_reward,accepted");
    }
}
