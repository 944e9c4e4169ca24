use autopref::envs::*;
use autopref::learner::*;
use autopref::scoring::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};

struct PotentialModel {
    v: Vec<f64>,
    kappa: f64,
    gamma: f64,
}

impl PotentialModel {
    fn reward(&self, cur: usize, next: usize) -> f64 {
        self.v[next] - self.v[cur] - self.kappa
    }

    fn ret(&self, t: &Trajectory, product: &Product) -> f64 {
        let nq = product.dfa.num_states();
        let mut d = 1.0;
        let mut total = 0.0;
        for s in &t.steps {
            let cur = s.env_state * nq + s.dfa_state;
            let next = s.next_env_state * nq + s.next_dfa_state;
            total += d * self.reward(cur, next);
            d *= self.gamma;
        }
        total
    }

    fn train(
        &mut self,
        pairs: &[(usize, usize)],
        trajs: &[Trajectory],
        product: &Product,
        lr: f64,
        epochs: usize,
        margin: f64,
        rng: &mut Prng,
    ) -> (f64, f64) {
        let nq = product.dfa.num_states();
        let feats: Vec<Vec<(usize, f64)>> = trajs
            .iter()
            .map(|t| {
                let mut f = Vec::new();
                let mut d = 1.0;
                for s in &t.steps {
                    f.push((s.env_state * nq + s.dfa_state, -d));
                    f.push((s.next_env_state * nq + s.next_dfa_state, d));
                    d *= self.gamma;
                }
                f
            })
            .collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for _ in 0..epochs {
            order.shuffle(rng);
            let mut any = false;
            for &k in &order {
                let (p, n) = pairs[k];
                let rp = self.ret(&trajs[p], product);
                let rn = self.ret(&trajs[n], product);
                if margin - (rp - rn) > 0.0 {
                    any = true;
                    for &(i, w) in &feats[p] {
                        self.v[i] += lr * w;
                    }
                    for &(i, w) in &feats[n] {
                        self.v[i] -= lr * w;
                    }
                }
            }
            if !any {
                break;
            }
        }
        let mut loss = 0.0;
        let mut correct = 0;
        for &(p, n) in pairs {
            let gap = self.ret(&trajs[p], product) - self.ret(&trajs[n], product);
            loss += (margin - gap).max(0.0);
            if gap > 0.0 {
                correct += 1;
            }
        }
        (loss, correct as f64 / pairs.len() as f64)
    }
}



fn main() {
    let env = make_env("dungeon_quest", &EnvParams::default()).unwrap();
    let dfa = bundled_dfa("dungeon_quest").unwrap();
    let product = Product::new(&env, &dfa).unwrap();
    let scorer =
        Scorer::subtask(ScoreWeights { transition_value: 0.0, ..Default::default() }, &product)
            .unwrap();
    let na = product.num_actions();
    let n_total = product.num_states();

    for (lr, epochs, gamma_r, kappa) in [(0.2f64, 400usize, 0.999f64, 0.1f64), (0.5, 400, 0.999, 0.1)] {
        let t0 = std::time::Instant::now();
        let mut rates = Vec::new();
        let mut vi_ok = 0;
        for seed in 0..10u64 {
            let mut rng = Prng::seed_from_u64(seed);
            let mut trajs = Vec::new();
            for _ in 0..200 {
                trajs.push(product.rollout(|_, r: &mut Prng| r.random_range(0..na), &mut rng, 200).unwrap());
            }
            let prefs = generate_preferences(&trajs, &scorer, &product, &PairingPolicy::default(), &mut rng).unwrap();
            let pairs: Vec<(usize, usize)> = prefs.iter().filter_map(|p| p.ordered()).collect();
            let mut model = PotentialModel { v: vec![0.0; n_total], kappa, gamma: gamma_r };
            let (_loss, _acc) = model.train(&pairs, &trajs, &product, lr, epochs, 1.0, &mut rng);

            // no-farm certificate: terminating VI greedy accepts
            let mut rng0 = Prng::seed_from_u64(0);
            let mut next = vec![0usize; n_total * na];
            let mut term = vec![false; n_total * na];
            for idx in 0..n_total {
                let ps = product.state_at(idx);
                if product.is_terminal(ps) { continue; }
                for a in 0..na {
                    let (nxt, _) = product.step(ps, a, &mut rng0);
                    next[idx * na + a] = product.index(nxt);
                    term[idx * na + a] = product.is_terminal(nxt);
                }
            }
            let mut vi = QTable::new(n_total, na, 1.0, 0.95);
            loop {
                let mut delta: f64 = 0.0;
                for idx in 0..n_total {
                    if product.is_terminal(product.state_at(idx)) { continue; }
                    for a in 0..na {
                        let cell = idx * na + a;
                        let fut = if term[cell] { 0.0 } else { vi.max_value(next[cell]) };
                        let new = model.reward(idx, next[cell]) + 0.95 * fut;
                        delta = delta.max((new - vi.value(idx, a)).abs());
                        vi.set(idx, a, new);
                    }
                }
                if delta < 1e-9 { break; }
            }
            let mut rngr = Prng::seed_from_u64(0);
            let vt = product.rollout(|ps, _: &mut Prng| vi.greedy_action_with_tol(product.index(ps), 1e-9), &mut rngr, 200).unwrap();
            if vt.terminal_accepted { vi_ok += 1; }

            let episodes = 3000;
            let mut q = QTable::new(n_total, na, 0.1, 0.95).with_epsilon(EpsilonSchedule::Linear {
                start: 1.0, end: 0.05, fraction: 0.6, total_episodes: episodes,
            });
            let mut flags = Vec::new();
            for ep in 0..episodes {
                let mut ps = product.initial_state();
                let mut steps = 0;
                while steps < 200 && !product.is_terminal(ps) {
                    let a = q.epsilon_greedy(product.index(ps), ep, &mut rng);
                    let tr = Transition::observe(&product, ps, a, &mut rng);
                    let r = model.reward(tr.state_index, tr.next_state_index);
                    q.q_update(&tr, r);
                    ps = tr.next_state;
                    steps += 1;
                }
                flags.push(product.is_terminal(ps));
            }
            let rate = flags[episodes - 200..].iter().filter(|&&x| x).count() as f64 / 200.0;
            rates.push(rate);
        }
        let mut sorted = rates.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("lr={lr} ep={epochs} gr={gamma_r} kappa={kappa}: VI accepts {vi_ok}/10, rates {rates:?} ({:?})", t0.elapsed());
    }
}
