//! Automaton-guided preference-based reinforcement learning.
//!
//! A deterministic finite automaton describes a temporally extended task.
//! Instead of hand-crafting a numeric reward for it, this crate ranks
//! trajectory pairs by DFA-derived scores, trains a tabular reward model
//! from those rankings with a pairwise hinge loss, and runs tabular
//! Q-learning against the learned reward on the product MDP. Baselines that
//! assign numeric rewards directly to automaton transitions (a known
//! hand-crafted reward, reward machines, potential shaping, and minimal
//! distillation shaping), teacher-to-student distillation of automaton
//! transition values, and a seeded experiment harness round out the crate.
//!
//! The `book/` directory of the repository walks through the concepts; its
//! code snippets compile and run as doctests of this crate.

pub mod automaton;
pub mod distill;
pub mod envs;
pub mod harness;
pub mod learner;
pub mod reward_model;
pub mod scoring;

pub use automaton::{parse_dfa, Dfa, DfaTrace};
pub use envs::{
    build_student_variant, bundled_dfa, make_env, Env, EnvParams, Product, ProductState,
    Trajectory,
};
