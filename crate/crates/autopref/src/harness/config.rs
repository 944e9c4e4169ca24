//! Experiment configuration: a flat `key = value` text format with one
//! section per module. Every key has a default; CLI flags override file
//! values.

use std::path::PathBuf;
use std::str::FromStr;

use crate::harness::HarnessError;
use crate::learner::{DynamicConfig, LearnerConfig};
use crate::scoring::{PairingPolicy, ScoreWeights};

/// The method an experiment trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Static,
    Dynamic,
    Known,
    RewardMachine,
    Lpopl,
    DistillShaping,
    StaticPrefPlan,
    DynamicPrefPlan,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Static,
        Method::Dynamic,
        Method::Known,
        Method::RewardMachine,
        Method::Lpopl,
        Method::DistillShaping,
        Method::StaticPrefPlan,
        Method::DynamicPrefPlan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Static => "static",
            Method::Dynamic => "dynamic",
            Method::Known => "known",
            Method::RewardMachine => "reward_machine",
            Method::Lpopl => "lpopl",
            Method::DistillShaping => "distill_shaping",
            Method::StaticPrefPlan => "static_pref_plan",
            Method::DynamicPrefPlan => "dynamic_pref_plan",
        }
    }

    /// Whether the method blends teacher transition values into Q-targets.
    pub fn uses_planning_values(&self) -> bool {
        matches!(self, Method::StaticPrefPlan | Method::DynamicPrefPlan)
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

/// Full description of an experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: String,
    /// DFA specification file; the bundled DFA for `env` when absent.
    pub dfa_path: Option<PathBuf>,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub horizon: Option<usize>,
    pub out_dir: PathBuf,
    pub weights: ScoreWeights,
    /// Transition-value table file for combined scoring / planning.
    pub transition_values: Option<PathBuf>,
    pub learner: LearnerConfig,
    pub dynamic: DynamicConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: "chain3".to_string(),
            dfa_path: None,
            method: Method::Static,
            seeds: vec![0],
            horizon: None,
            out_dir: PathBuf::from("runs"),
            weights: ScoreWeights::default(),
            transition_values: None,
            learner: LearnerConfig::default(),
            dynamic: DynamicConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses the config text into a config, starting from defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut config = ExperimentConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    /// Applies `key = value` assignments from config text on top of the
    /// current values.
    pub fn apply(&mut self, text: &str) -> Result<(), HarnessError> {
        let mut section = "experiment".to_string();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fail = |msg: String| HarnessError::Config(format!("line {}: {msg}", idx + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| fail("expected `key = value`".to_string()))?;
            self.set(&section, key, value).map_err(|e| fail(e))?;
        }
        Ok(())
    }

    /// Sets one configuration key. Key names mirror the CLI flags.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| format!("bad value for `{key}`: {e}"))
        }
        match (section, key) {
            ("experiment", "env") => self.env = value.to_string(),
            ("experiment", "dfa") => {
                self.dfa_path = (!value.is_empty()).then(|| PathBuf::from(value))
            }
            ("experiment", "method") => {
                self.method = value.parse().map_err(|e: HarnessError| e.to_string())?
            }
            ("experiment", "seeds") => {
                self.seeds = value
                    .split_whitespace()
                    .map(|t| num::<u64>("seeds", t))
                    .collect::<Result<_, _>>()?;
            }
            ("experiment", "horizon") => {
                self.horizon = (!value.is_empty()).then(|| num("horizon", value)).transpose()?
            }
            ("experiment", "out") => self.out_dir = PathBuf::from(value),
            ("scoring", "w_s") => self.weights.subgoal = num(key, value)?,
            ("scoring", "w_d") => self.weights.distance = num(key, value)?,
            ("scoring", "w_q") => self.weights.transition_value = num(key, value)?,
            ("scoring", "transition_values") => {
                self.transition_values = (!value.is_empty()).then(|| PathBuf::from(value))
            }
            ("scoring", "all_pairs_max") => {
                self.learner.pairing =
                    PairingPolicy { all_pairs_max: num(key, value)?, ..self.learner.pairing }
            }
            ("scoring", "sample_pairs") => {
                self.learner.pairing =
                    PairingPolicy { sample_pairs: num(key, value)?, ..self.learner.pairing }
            }
            ("reward", "lr") => self.learner.reward_training.learning_rate = num(key, value)?,
            ("reward", "epochs") => self.learner.reward_training.epochs = num(key, value)?,
            ("reward", "l2") => self.learner.reward_training.l2 = num(key, value)?,
            ("reward", "margin") => self.learner.margin = num(key, value)?,
            ("learner", "alpha") => self.learner.alpha = num(key, value)?,
            ("learner", "gamma") => self.learner.gamma = num(key, value)?,
            ("learner", "episodes") => self.learner.episodes = num(key, value)?,
            ("learner", "n_init") => self.learner.initial_trajectories = num(key, value)?,
            ("learner", "eps_start") => self.learner.epsilon_start = num(key, value)?,
            ("learner", "eps_end") => self.learner.epsilon_end = num(key, value)?,
            ("learner", "eps_fraction") => self.learner.epsilon_fraction = num(key, value)?,
            ("learner", "rho") => self.learner.rho = num(key, value)?,
            ("dynamic", "k_max") => self.dynamic.max_iterations = num(key, value)?,
            ("dynamic", "block") => self.dynamic.block_episodes = num(key, value)?,
            ("dynamic", "window") => self.dynamic.stability_window = num(key, value)?,
            ("dynamic", "stability_tol") => self.dynamic.stability_tol = num(key, value)?,
            ("dynamic", "trajs_per_iter") => {
                self.dynamic.trajectories_per_iteration = num(key, value)?
            }
            ("dynamic", "buffer_cap") => self.dynamic.buffer_capacity = num(key, value)?,
            ("dynamic", "epochs_per_iter") => {
                self.dynamic.epochs_per_iteration = num(key, value)?
            }
            _ => return Err(format!("unknown key `{key}` in section `[{section}]`")),
        }
        Ok(())
    }

    /// Field-level validation of cross-key requirements.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".to_string()));
        }
        if self.method.uses_planning_values() && self.transition_values.is_none() {
            return Err(HarnessError::Config(format!(
                "method `{}` requires [scoring] transition_values",
                self.method.name()
            )));
        }
        if self.horizon == Some(0) {
            return Err(HarnessError::Config("horizon must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_overrides_defaults() {
        let text = "\
# experiment
[experiment]
env = dungeon_quest
method = dynamic
seeds = 0 1 2
out = runs/demo

[scoring]
w_s = 20
w_q = 0.5

[learner]
alpha = 0.2
episodes = 1234

[dynamic]
k_max = 7
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.env, "dungeon_quest");
        assert_eq!(c.method, Method::Dynamic);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.weights.subgoal, 20.0);
        assert_eq!(c.weights.transition_value, 0.5);
        assert_eq!(c.weights.distance, 0.1); // default kept
        assert_eq!(c.learner.alpha, 0.2);
        assert_eq!(c.learner.episodes, 1234);
        assert_eq!(c.dynamic.max_iterations, 7);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_with_field_level_message() {
        let err = ExperimentConfig::parse("[experiment]\nenv = chain3\nnope = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("nope"), "{msg}");
    }

    #[test]
    fn validation_catches_cross_field_requirements() {
        let mut c = ExperimentConfig::default();
        c.seeds.clear();
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default();
        c.method = Method::StaticPrefPlan;
        assert!(c.validate().is_err());
        c.transition_values = Some(PathBuf::from("table.tv"));
        c.validate().unwrap();
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }
}
