use delaylab::algorithms::{alpha_weights, g_optimal_design, g_value, WeightedFtrl};
use delaylab::delay::{ArrivalQueue, DelayLaw, DelaySampler};
use delaylab::equilibrium::{
    duality_gap, solve_cce_pair, solve_zero_sum, verify_cce, Matrix, QPairMatrix,
};
use delaylab::harness::{instances, RegretOracle};
use delaylab::msdm::{
    best_response_value, cce_gap, nash_value, policy_value, EnvKind, JointPolicy, MsdmEnv,
    RewardNoise, Shape,
};
use delaylab::rng::{stream, Stream};
use nalgebra::DVector;
use proptest::prelude::*;

fn random_product_policy(shape: &Shape, seed: u64) -> JointPolicy {
    let mut rng = stream(seed, Stream::Misc);
    let cells = shape.horizon() * shape.n_states();
    let marginals = shape
        .actions()
        .iter()
        .map(|&a| {
            (0..cells)
                .flat_map(|_| {
                    let w: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(move |x| x / s)
                })
                .collect()
        })
        .collect();
    JointPolicy::product(shape.clone(), marginals).unwrap()
}

fn random_general_sum(seed: u64) -> MsdmEnv {
    let mut rng = stream(seed, Stream::Misc);
    let shape = Shape::new(2, 2, vec![2, 3]).unwrap();
    let cells = 2 * 2 * 6;
    let rewards = (0..cells * 2).map(|_| rng.random::<f64>()).collect();
    let transitions = (0..cells)
        .flat_map(|_| {
            let p: f64 = rng.random();
            [p, 1.0 - p]
        })
        .collect();
    MsdmEnv::new(EnvKind::GeneralsumMg, shape, 0, rewards, transitions, RewardNoise::None).unwrap()
}

/// Expected return by summing over every state/action path.
fn enumerate_value(env: &MsdmEnv, pi: &JointPolicy, player: usize) -> f64 {
    fn go(env: &MsdmEnv, pi: &JointPolicy, player: usize, h: usize, s: usize) -> f64 {
        if h == env.horizon() {
            return 0.0;
        }
        let dist = pi.joint_distribution(h, s);
        let mut total = 0.0;
        for (j, &pj) in dist.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            let mut path = env.reward_mean(h, s, j, player);
            for (s2, &p) in env.transition_row(h, s, j).iter().enumerate() {
                if p > 0.0 {
                    path += p * go(env, pi, player, h + 1, s2);
                }
            }
            total += pj * path;
        }
        total
    }
    go(env, pi, player, 0, env.initial_state())
}

fn matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix {
    let mut rng = stream(seed, Stream::Misc);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>() * scale).collect())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_response_dominates_value(seed in 0u64..1_000_000) {
        let env = instances::random_zero_sum_mg(3, 2, 3, 3, seed).unwrap();
        let pi = random_product_policy(env.shape(), seed ^ 0xabc);
        for i in 0..2 {
            prop_assert!(best_response_value(&env, &pi, i).unwrap() >= policy_value(&env, &pi, i).unwrap() - 1e-9);
        }
        let g = random_general_sum(seed);
        let pg = random_product_policy(g.shape(), seed);
        prop_assert!(cce_gap(&g, &pg).unwrap() >= 0.0);
    }

    #[test]
    fn dynamic_programming_matches_enumeration(seed in 0u64..1_000_000) {
        let env = instances::random_zero_sum_mg(2, 2, 2, 3, seed).unwrap();
        let pi = random_product_policy(env.shape(), seed + 1);
        let dp = policy_value(&env, &pi, 0).unwrap();
        prop_assert!((dp - enumerate_value(&env, &pi, 0)).abs() < 1e-10);
        let g = random_general_sum(seed);
        let pg = random_product_policy(g.shape(), seed);
        for i in 0..2 {
            prop_assert!((policy_value(&g, &pg, i).unwrap() - enumerate_value(&g, &pg, i)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_sum_values_are_antisymmetric(seed in 0u64..1_000_000) {
        let env = instances::random_zero_sum_mg(3, 2, 2, 2, seed).unwrap();
        let pi = random_product_policy(env.shape(), seed);
        let v0 = policy_value(&env, &pi, 0).unwrap();
        let v1 = policy_value(&env, &pi, 1).unwrap();
        prop_assert!((v0 + v1).abs() < 1e-12);
    }

    #[test]
    fn nash_policy_has_no_regret_and_sandwiches(seed in 0u64..1_000_000) {
        let env = instances::random_zero_sum_mg(2, 3, 2, 2, seed).unwrap();
        let nash = nash_value(&env).unwrap();
        let oracle = RegretOracle::new(&env).unwrap();
        prop_assert!(oracle.instantaneous(&nash.policy).unwrap().abs() < 1e-6);
        let pi = random_product_policy(env.shape(), seed);
        // V^{mu, dagger} <= V* <= V^{dagger, nu}
        let lo = -best_response_value(&env, &pi, 1).unwrap();
        let hi = best_response_value(&env, &pi, 0).unwrap();
        let v = nash.value_at(&env);
        prop_assert!(lo <= v + 1e-9 && v <= hi + 1e-9);
        prop_assert!(oracle.instantaneous(&pi).unwrap() >= -1e-6);
    }

    #[test]
    fn quantile_is_the_galois_inverse_of_the_cdf(p in 0.01f64..1.0, lambda in 0.0f64..30.0, q in 0.001f64..0.999) {
        for law in [DelayLaw::Geometric { p }, DelayLaw::Poisson { lambda }] {
            let d = DelaySampler::new(law).unwrap();
            let g = d.quantile(q).unwrap();
            prop_assert!(d.cdf(g) >= q);
            if g > 0 {
                prop_assert!(d.cdf(g - 1) < q);
            }
        }
    }

    #[test]
    fn queue_conserves_items(taus in prop::collection::vec(0u64..20, 1..80)) {
        let mut q = ArrivalQueue::new();
        let mut delivered = Vec::new();
        for (k, &tau) in taus.iter().enumerate() {
            let k = k + 1;
            q.push(k, tau, k).unwrap();
            let got = q.deliver(k).unwrap();
            for a in &got {
                prop_assert_eq!(a.arrival, k);
                prop_assert_eq!(a.emit + taus[a.emit - 1] as usize, k);
                delivered.push(a.item);
            }
            prop_assert_eq!(q.emitted(), k);
            prop_assert_eq!(q.delivered() + q.pending(), k);
        }
        delivered.sort_unstable();
        delivered.dedup();
        prop_assert_eq!(delivered.len(), q.delivered());
    }

    #[test]
    fn cce_shift_equivariance(a in 1usize..5, b in 1usize..5, seed in 0u64..100_000, c in -5.0f64..5.0) {
        let lower = matrix(a, b, seed, 2.0);
        let upper = lower.map(|x| x + 0.5);
        let pair = QPairMatrix::new(upper, lower).unwrap();
        let sol = solve_cce_pair(&pair, 1e-3).unwrap();
        let shifted = pair.shift(c);
        let (g1, g2) = verify_cce(&sol.dist, &pair);
        let (s1, s2) = verify_cce(&sol.dist, &shifted);
        prop_assert!((g1 - s1).abs() < 1e-9 && (g2 - s2).abs() < 1e-9);
        let sol2 = solve_cce_pair(&shifted, 1e-3).unwrap();
        let (t1, t2) = verify_cce(&sol2.dist, &shifted);
        prop_assert!(t1 <= 1e-3 + 1e-12 && t2 <= 1e-3 + 1e-12);
    }

    #[test]
    fn zero_sum_solutions_are_certified(a in 1usize..7, b in 1usize..7, seed in 0u64..100_000) {
        let m = matrix(a, b, seed, 1.0);
        let z = solve_zero_sum(&m, 1e-9).unwrap();
        prop_assert!(duality_gap(&m, &z.row, &z.col) <= 1e-6);
        // transposing and negating swaps the players
        let t = m.transpose().map(|x| -x);
        let zt = solve_zero_sum(&t, 1e-9).unwrap();
        prop_assert!((zt.value + z.value).abs() < 1e-6);
    }

    #[test]
    fn design_weights_are_a_distribution(d in 1usize..5, extra in 0usize..8, seed in 0u64..100_000) {
        let mut rng = stream(seed, Stream::Misc);
        let feats: Vec<DVector<f64>> = (0..d + extra)
            .map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let des = g_optimal_design(&feats, 0.04).unwrap();
        let s: f64 = des.weights.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        prop_assert!(des.weights.iter().all(|&w| w >= 0.0));
        prop_assert!(des.support().len() <= des.dim * (des.dim + 1) / 2);
        prop_assert!(des.g <= des.dim as f64 * 1.04 + 1e-9);
        prop_assert!((g_value(&feats, &des.weights).unwrap() - des.g).abs() < 1e-6 * des.g.max(1.0));
    }

    #[test]
    fn ftrl_policies_stay_distributions(losses in prop::collection::vec((0usize..3, 0.0f64..1.0), 1..200)) {
        let mut f = WeightedFtrl::new(3, 2, 1.0);
        for (a, l) in losses {
            let p = f.policy()[a];
            f.update(a, l, p);
            let s: f64 = f.policy().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(f.policy().iter().all(|&x| x >= 0.0 && x.is_finite()));
        }
    }

    #[test]
    fn alpha_weights_sum_to_one(h in 1usize..8, t in 1u64..400) {
        let w = alpha_weights(h, t);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn regret_is_nonnegative_on_fixed_instances() {
    let bandit = instances::five_arm_bandit().unwrap();
    let game = instances::nash_vi_game().unwrap();
    let linear = instances::lsvi_game().unwrap();
    for env in [&bandit, &game, &linear] {
        let o = RegretOracle::new(env).unwrap();
        for seed in 0..20 {
            let pi = random_product_policy(env.shape(), seed);
            assert!(o.instantaneous(&pi).unwrap() >= -1e-6);
        }
    }
}
