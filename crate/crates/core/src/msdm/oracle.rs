//! Exact backward-induction oracles on mean rewards.
//!
//! All values are evaluated at the initial state unless the `_table` variant
//! is used; tables are flat `[h][s]` with `H + 1` rows and a zero terminal row.

use crate::equilibrium::{solve_zero_sum, Matrix};
use crate::error::{contract, Result};
use crate::msdm::{JointPolicy, MsdmEnv};

/// Duality-gap tolerance for stage games inside `nash_value`.
pub const NASH_STAGE_TOL: f64 = 1e-6;

fn check_policy(env: &MsdmEnv, policy: &JointPolicy) -> Result<()> {
    if policy.shape() != env.shape() {
        return Err(contract("policy shape does not match environment"));
    }
    Ok(())
}

fn check_player(env: &MsdmEnv, player: usize) -> Result<()> {
    if player >= env.n_players() {
        return Err(contract(format!("player {player} out of range")));
    }
    Ok(())
}

/// `r_i(h,s,j) + sum_s' p(s'|h,s,j) next[s']` for every joint action.
fn continuation(env: &MsdmEnv, h: usize, s: usize, player: usize, next: &[f64]) -> Vec<f64> {
    (0..env.n_joint())
        .map(|j| {
            let p = env.transition_row(h, s, j);
            env.reward_mean(h, s, j, player)
                + p.iter().zip(next).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// `V^pi_i` for every `(h, s)`.
pub fn policy_value_table(env: &MsdmEnv, policy: &JointPolicy, player: usize) -> Result<Vec<f64>> {
    check_policy(env, policy)?;
    check_player(env, player)?;
    let (hz, ns) = (env.horizon(), env.n_states());
    let mut v = vec![0.0; (hz + 1) * ns];
    for h in (0..hz).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let q = continuation(env, h, s, player, next);
            let pi = policy.joint_distribution(h, s);
            cur[h * ns + s] = pi.iter().zip(&q).map(|(p, q)| p * q).sum();
        }
    }
    Ok(v)
}

/// `V^pi_{i,1}(s_1)`.
pub fn policy_value(env: &MsdmEnv, policy: &JointPolicy, player: usize) -> Result<f64> {
    let v = policy_value_table(env, policy, player)?;
    Ok(v[env.initial_state()])
}

/// Best-response values of `player` against the others' marginal of `policy`.
///
/// The deviator picks its own action independently while the remaining
/// players keep their (possibly correlated) joint marginal.
pub fn best_response_table(
    env: &MsdmEnv,
    policy: &JointPolicy,
    player: usize,
) -> Result<Vec<f64>> {
    check_policy(env, policy)?;
    check_player(env, player)?;
    let shape = env.shape();
    let (hz, ns) = (env.horizon(), env.n_states());
    let n_own = env.actions()[player];
    let mut v = vec![0.0; (hz + 1) * ns];
    let mut qdev = vec![0.0; n_own];
    for h in (0..hz).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let q = continuation(env, h, s, player, next);
            let pi = policy.joint_distribution(h, s);
            qdev.iter_mut().for_each(|x| *x = 0.0);
            for (j, &p) in pi.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a, slot) in qdev.iter_mut().enumerate() {
                    *slot += p * q[shape.with_action(j, player, a)];
                }
            }
            cur[h * ns + s] = argmax_lowest(&qdev).1;
        }
    }
    Ok(v)
}

/// `V^{dagger, pi_{-i}}_{i,1}(s_1)`.
pub fn best_response_value(env: &MsdmEnv, policy: &JointPolicy, player: usize) -> Result<f64> {
    let v = best_response_table(env, policy, player)?;
    Ok(v[env.initial_state()])
}

/// `max_j (V^{dagger, pi_{-j}}_j - V^pi_j)(s_1)`, clamped below at zero.
pub fn cce_gap(env: &MsdmEnv, policy: &JointPolicy) -> Result<f64> {
    let mut gap = 0.0f64;
    for i in 0..env.n_players() {
        let br = best_response_value(env, policy, i)?;
        let val = policy_value(env, policy, i)?;
        gap = gap.max(br - val);
    }
    Ok(gap)
}

/// Nash values and the stage-wise equilibrium strategies of a two-player
/// zero-sum game.
#[derive(Debug, Clone)]
pub struct NashSolution {
    /// `V*_h(s)` flat `[h][s]`, `H + 1` rows.
    pub values: Vec<f64>,
    /// Product policy `(mu*, nu*)`.
    pub policy: JointPolicy,
}

impl NashSolution {
    pub fn value_at(&self, env: &MsdmEnv) -> f64 {
        self.values[env.initial_state()]
    }
}

/// Backward induction with a zero-sum stage solve at every `(h, s)`.
pub fn nash_value(env: &MsdmEnv) -> Result<NashSolution> {
    if !env.kind().is_zero_sum() || env.n_players() != 2 {
        return Err(contract("nash_value needs a two-player zero-sum environment"));
    }
    let (hz, ns) = (env.horizon(), env.n_states());
    let (na, nb) = (env.actions()[0], env.actions()[1]);
    let mut v = vec![0.0; (hz + 1) * ns];
    let mut mu = vec![0.0; hz * ns * na];
    let mut nu = vec![0.0; hz * ns * nb];
    for h in (0..hz).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let q = continuation(env, h, s, 0, next);
            let m = Matrix::from_vec(na, nb, q)?;
            let sol = solve_zero_sum(&m, NASH_STAGE_TOL)?;
            cur[h * ns + s] = sol.value;
            let cell = h * ns + s;
            mu[cell * na..(cell + 1) * na].copy_from_slice(&sol.row);
            nu[cell * nb..(cell + 1) * nb].copy_from_slice(&sol.col);
        }
    }
    let policy = JointPolicy::product(env.shape().clone(), vec![mu, nu])?;
    Ok(NashSolution { values: v, policy })
}

/// Index and value of the maximum; ties go to the lowest index.
pub(crate) fn argmax_lowest(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdm::{EnvKind, RewardNoise, Shape};

    /// Sums probability-weighted returns over every joint-action / next-state
    /// sequence of length H.
    fn enumerate_value(env: &MsdmEnv, pol: &JointPolicy, player: usize) -> f64 {
        fn rec(env: &MsdmEnv, pol: &JointPolicy, player: usize, h: usize, s: usize) -> f64 {
            if h == env.horizon() {
                return 0.0;
            }
            let pi = pol.joint_distribution(h, s);
            let mut total = 0.0;
            for j in 0..env.n_joint() {
                if pi[j] == 0.0 {
                    continue;
                }
                let p = env.transition_row(h, s, j);
                for s2 in 0..env.n_states() {
                    if p[s2] == 0.0 {
                        continue;
                    }
                    total += pi[j]
                        * p[s2]
                        * (env.reward_mean(h, s, j, player) + rec(env, pol, player, h + 1, s2));
                }
            }
            total
        }
        rec(env, pol, player, 0, env.initial_state())
    }

    fn two_state_game() -> MsdmEnv {
        // H = 2, S = 2, two players with 2 actions each, general-sum.
        let shape = Shape::new(2, 2, vec![2, 2]).unwrap();
        let mut rewards = Vec::new();
        let mut trans = Vec::new();
        for h in 0..2 {
            for s in 0..2 {
                for j in 0..4 {
                    let base = ((h * 2 + s) * 4 + j) as f64;
                    rewards.push((base * 0.037) % 1.0);
                    rewards.push((base * 0.061 + 0.2) % 1.0);
                    let p = 0.1 + 0.2 * (j as f64) / 3.0 + 0.1 * s as f64;
                    trans.push(p);
                    trans.push(1.0 - p);
                }
            }
        }
        MsdmEnv::new(EnvKind::GeneralsumMg, shape, 0, rewards, trans, RewardNoise::None).unwrap()
    }

    #[test]
    fn bandit_point_mass_value() {
        let env = MsdmEnv::bandit(&[0.2, 0.7], RewardNoise::None).unwrap();
        let pol = JointPolicy::deterministic(env.shape().clone(), |_, _| 1).unwrap();
        assert_eq!(policy_value(&env, &pol, 0).unwrap(), 0.7);
    }

    #[test]
    fn zero_reward_env_has_zero_value() {
        let shape = Shape::new(3, 2, vec![2]).unwrap();
        let env = MsdmEnv::new(
            EnvKind::Mdp,
            shape.clone(),
            0,
            vec![0.0; 12],
            [0.5; 24].to_vec(),
            RewardNoise::None,
        )
        .unwrap();
        let pol = JointPolicy::uniform(shape);
        assert_eq!(policy_value(&env, &pol, 0).unwrap(), 0.0);
        assert_eq!(best_response_value(&env, &pol, 0).unwrap(), 0.0);
    }

    #[test]
    fn dp_matches_enumeration_on_two_state_game() {
        let env = two_state_game();
        let shape = env.shape().clone();
        let pol = JointPolicy::product(
            shape,
            vec![vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.9, 0.1], vec![
                0.2, 0.8, 0.45, 0.55, 1.0, 0.0, 0.35, 0.65,
            ]],
        )
        .unwrap();
        for player in 0..2 {
            let dp = policy_value(&env, &pol, player).unwrap();
            let brute = enumerate_value(&env, &pol, player);
            assert!((dp - brute).abs() < 1e-9, "{dp} vs {brute}");
        }
    }

    #[test]
    fn best_response_on_matrix_against_uniform() {
        let m = [vec![3.0 / 3.0, 0.0], vec![1.0 / 3.0, 2.0 / 3.0]];
        let env = MsdmEnv::matrix_game(&m, RewardNoise::None).unwrap();
        let pol = JointPolicy::uniform(env.shape().clone());
        // row means of [[3,0],[1,2]] / 3 against uniform: (0.5, 0.5)
        let br = best_response_value(&env, &pol, 0).unwrap();
        assert!((br - 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_action_player_br_equals_value() {
        let env = two_state_game();
        let pol = JointPolicy::uniform(env.shape().clone());
        let shape = Shape::new(1, 1, vec![1]).unwrap();
        let bandit = MsdmEnv::new(EnvKind::Mdp, shape.clone(), 0, vec![0.4], vec![1.0], RewardNoise::None).unwrap();
        let p1 = JointPolicy::uniform(shape);
        assert_eq!(
            best_response_value(&bandit, &p1, 0).unwrap(),
            policy_value(&bandit, &p1, 0).unwrap()
        );
        assert!(best_response_value(&env, &pol, 0).unwrap() >= policy_value(&env, &pol, 0).unwrap());
    }

    #[test]
    fn best_response_policy_is_fixed_point() {
        // Single player: the greedy policy is its own best response.
        let env = MsdmEnv::bandit(&[0.1, 0.8, 0.3], RewardNoise::None).unwrap();
        let pol = JointPolicy::deterministic(env.shape().clone(), |_, _| 1).unwrap();
        assert_eq!(
            best_response_value(&env, &pol, 0).unwrap(),
            policy_value(&env, &pol, 0).unwrap()
        );
        assert_eq!(cce_gap(&env, &pol).unwrap(), 0.0);
    }

    #[test]
    fn single_player_gap_is_suboptimality() {
        let env = MsdmEnv::bandit(&[0.1, 0.8, 0.3], RewardNoise::None).unwrap();
        let pol = JointPolicy::uniform(env.shape().clone());
        let gap = cce_gap(&env, &pol).unwrap();
        assert!((gap - (0.8 - 1.2 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_uniform_gap_zero() {
        let env = MsdmEnv::matrix_game(&[vec![1.0, 0.0], vec![0.0, 1.0]], RewardNoise::None)
            .unwrap();
        let pol = JointPolicy::uniform(env.shape().clone());
        assert!(cce_gap(&env, &pol).unwrap().abs() < 1e-15);
        let nash = nash_value(&env).unwrap();
        assert!((nash.value_at(&env) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn nash_of_three_zero_one_two() {
        // [[3,0],[1,2]] scaled by 1/3 to stay in [0,1]: value 1.5 / 3.
        let m = [vec![1.0, 0.0], vec![1.0 / 3.0, 2.0 / 3.0]];
        let env = MsdmEnv::matrix_game(&m, RewardNoise::None).unwrap();
        let nash = nash_value(&env).unwrap();
        assert!((nash.value_at(&env) - 0.5).abs() < 1e-6);
        let mu = nash.policy.marginal(0, 0, 0);
        assert!((mu[0] - 0.25).abs() < 1e-6);
        assert!(cce_gap(&env, &nash.policy).unwrap() <= 1e-6);
    }

    #[test]
    fn nash_rejects_general_sum() {
        assert!(nash_value(&two_state_game()).is_err());
    }
}
