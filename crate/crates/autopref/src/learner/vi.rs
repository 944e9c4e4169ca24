//! Exact value iteration on the product MDP. Dynamics are deterministic, so
//! the transition and reward tables are built once and iterated to a sup-norm
//! fixed point; the result is the ground truth the learning tests compare
//! against.

use rand::SeedableRng;

use crate::envs::{Prng, Product};
use crate::learner::{LearnerError, QTable, RewardSource, Transition};

/// Solves `Q(s,a) = r(s,a) + gamma * max_a' Q(s',a')` to within `tol` in the
/// sup norm. Accepting product states are terminal: their rows stay zero and
/// transitions into them do not bootstrap.
pub fn value_iteration(
    product: &Product,
    reward: &RewardSource,
    gamma: f64,
    tol: f64,
) -> Result<QTable, LearnerError> {
    let n = product.num_states();
    let na = product.num_actions();
    let mut rng = Prng::seed_from_u64(0); // dynamics are deterministic

    // Model tables: successor index, reward, and terminal flag per (s, a).
    let mut next = vec![0usize; n * na];
    let mut rewards = vec![0.0f64; n * na];
    let mut terminal_next = vec![false; n * na];
    let mut terminal_state = vec![false; n];
    for idx in 0..n {
        let ps = product.state_at(idx);
        terminal_state[idx] = product.is_terminal(ps);
        if terminal_state[idx] {
            continue;
        }
        for a in 0..na {
            let t = Transition::observe(product, ps, a, &mut rng);
            let r = reward.eval(product.dfa, &t);
            if !r.is_finite() {
                return Err(LearnerError::NonFiniteReward);
            }
            next[idx * na + a] = t.next_state_index;
            rewards[idx * na + a] = r;
            terminal_next[idx * na + a] = t.terminal;
        }
    }

    let mut q = QTable::new(n, na, 1.0, gamma);
    if gamma == 0.0 {
        for idx in 0..n {
            if terminal_state[idx] {
                continue;
            }
            for a in 0..na {
                q.set(idx, a, rewards[idx * na + a]);
            }
        }
        return Ok(q);
    }

    loop {
        let mut delta: f64 = 0.0;
        for idx in 0..n {
            if terminal_state[idx] {
                continue;
            }
            for a in 0..na {
                let cell = idx * na + a;
                let future =
                    if terminal_next[cell] { 0.0 } else { q.max_value(next[cell]) };
                let new = rewards[cell] + gamma * future;
                delta = delta.max((new - q.value(idx, a)).abs());
                q.set(idx, a, new);
            }
        }
        if delta < tol {
            return Ok(q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{bundled_dfa, make_env, EnvParams};
    use crate::learner::{KnownParams, ShapingParams};

    #[test]
    fn chain3_optimal_policy_is_always_right() {
        let env = make_env("chain3", &EnvParams::default()).unwrap();
        let dfa = bundled_dfa("chain3").unwrap();
        let product = Product::new(&env, &dfa).unwrap();
        let source = RewardSource::DistillShaping(ShapingParams::default());
        let q = value_iteration(&product, &source, 0.95, 1e-10).unwrap();
        for ps in product.reachable_states() {
            if product.is_terminal(ps) {
                continue;
            }
            assert_eq!(q.greedy_action_with_tol(product.index(ps), 1e-6), 1, "state {ps:?}");
        }
    }

    #[test]
    fn gamma_zero_yields_the_immediate_reward_table() {
        let env = make_env("chain3", &EnvParams::default()).unwrap();
        let dfa = bundled_dfa("chain3").unwrap();
        let product = Product::new(&env, &dfa).unwrap();
        let source = RewardSource::Known(KnownParams::default());
        let q = value_iteration(&product, &source, 0.0, 1e-10).unwrap();
        let mut rng = Prng::seed_from_u64(0);
        for ps in product.reachable_states() {
            if product.is_terminal(ps) {
                continue;
            }
            for a in 0..product.num_actions() {
                let t = Transition::observe(&product, ps, a, &mut rng);
                assert_eq!(q.value(product.index(ps), a), source.eval(&dfa, &t));
            }
        }
    }

    #[test]
    fn value_iteration_is_deterministic() {
        let env = make_env("chain3", &EnvParams::default()).unwrap();
        let dfa = bundled_dfa("chain3").unwrap();
        let product = Product::new(&env, &dfa).unwrap();
        let source = RewardSource::Known(KnownParams::default());
        let a = value_iteration(&product, &source, 0.95, 1e-10).unwrap();
        let b = value_iteration(&product, &source, 0.95, 1e-10).unwrap();
        assert_eq!(a, b);
    }
}
