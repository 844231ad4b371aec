use rand::Rng;

use crate::error::Result;
use crate::msdm::{JointPolicy, MsdmEnv};

/// One step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: usize,
    /// Joint-action index.
    pub action: usize,
    /// Realized rewards, length `env.reward_dim()`.
    pub rewards: Vec<f64>,
    pub next_state: usize,
}

/// The feedback of one episode: exactly `H` transitions starting at the
/// initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One-based episode index.
    pub episode: usize,
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Samples one episode: at each step draw a joint action from the policy, then step.
pub fn run_episode<R: Rng + ?Sized>(
    env: &MsdmEnv,
    policy: &JointPolicy,
    episode: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut s = env.initial_state();
    let mut steps = Vec::with_capacity(env.horizon());
    for h in 0..env.horizon() {
        let j = policy.sample(h, s, rng);
        let out = env.step(h, s, j, rng)?;
        steps.push(Transition {
            state: s,
            action: j,
            rewards: out.rewards,
            next_state: out.next_state,
        });
        s = out.next_state;
    }
    Ok(Trajectory { episode, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdm::{EnvKind, RewardNoise, Shape};
    use crate::rng::{stream, Stream};

    #[test]
    fn bandit_trajectory_is_single_tuple() {
        let env = MsdmEnv::bandit(&[0.2, 0.9], RewardNoise::None).unwrap();
        let pol = JointPolicy::deterministic(env.shape().clone(), |_, _| 1).unwrap();
        let mut rng = stream(3, Stream::Env);
        let tr = run_episode(&env, &pol, 1, &mut rng).unwrap();
        assert_eq!(
            tr.steps,
            vec![Transition {
                state: 0,
                action: 1,
                rewards: vec![0.9],
                next_state: 0
            }]
        );
    }

    #[test]
    fn same_seed_same_trajectory() {
        let env = MsdmEnv::bandit(&[0.2, 0.9, 0.5], RewardNoise::Bernoulli).unwrap();
        let pol = JointPolicy::uniform(env.shape().clone());
        let a = run_episode(&env, &pol, 4, &mut stream(9, Stream::Env)).unwrap();
        let b = run_episode(&env, &pol, 4, &mut stream(9, Stream::Env)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_walk_matches_hand_trace() {
        // States 0 -> 1 -> 2 under action 1, action 0 stays put.
        let h = 3;
        let s = 3;
        let shape = Shape::new(h, s, vec![2]).unwrap();
        let mut rewards = vec![0.0; h * s * 2];
        let mut trans = vec![0.0; h * s * 2 * s];
        for step in 0..h {
            for st in 0..s {
                for a in 0..2 {
                    let cell = (step * s + st) * 2 + a;
                    rewards[cell] = if a == 1 { 0.25 * (st + 1) as f64 } else { 0.0 };
                    let next = if a == 1 { (st + 1).min(s - 1) } else { st };
                    trans[cell * s + next] = 1.0;
                }
            }
        }
        let env =
            MsdmEnv::new(EnvKind::Mdp, shape.clone(), 0, rewards, trans, RewardNoise::None)
                .unwrap();
        let pol = JointPolicy::deterministic(shape, |_, _| 1).unwrap();
        let tr = run_episode(&env, &pol, 1, &mut stream(0, Stream::Env)).unwrap();
        let walk: Vec<(usize, usize, f64, usize)> = tr
            .steps
            .iter()
            .map(|t| (t.state, t.action, t.rewards[0], t.next_state))
            .collect();
        assert_eq!(walk, vec![(0, 1, 0.25, 1), (1, 1, 0.5, 2), (2, 1, 0.75, 2)]);
    }
}
