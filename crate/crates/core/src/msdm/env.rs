use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::msdm::linear::LinearEnvSpec;

const ROW_TOL: f64 = 1e-12;

/// Which setting an environment models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Bandit,
    LinearBandit,
    Mdp,
    ZerosumMg,
    GeneralsumMg,
    LinearMg,
}

impl EnvKind {
    /// Two-player zero-sum kinds store only player 0's reward.
    pub fn is_zero_sum(self) -> bool {
        matches!(self, EnvKind::ZerosumMg | EnvKind::LinearMg)
    }

    pub fn is_linear(self) -> bool {
        matches!(self, EnvKind::LinearBandit | EnvKind::LinearMg)
    }
}

/// Realized reward law around the declared mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    #[default]
    Bernoulli,
    /// Realized reward equals the mean.
    None,
}

/// Sizes shared by environments and policies, with joint-action arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    horizon: usize,
    n_states: usize,
    actions: Vec<usize>,
    strides: Vec<usize>,
    n_joint: usize,
}

impl Shape {
    pub fn new(horizon: usize, n_states: usize, actions: Vec<usize>) -> Result<Self> {
        if horizon == 0 {
            return Err(contract("horizon must be positive"));
        }
        if n_states == 0 {
            return Err(contract("state set must be non-empty"));
        }
        if actions.is_empty() || actions.contains(&0) {
            return Err(contract("every player needs at least one action"));
        }
        let mut strides = vec![1; actions.len()];
        for i in (0..actions.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * actions[i + 1];
        }
        let n_joint = actions.iter().product();
        Ok(Self {
            horizon,
            n_states,
            actions,
            strides,
            n_joint,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    pub fn joint_index(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.actions.len() {
            return Err(contract(format!(
                "joint action has {} components, expected {}",
                profile.len(),
                self.actions.len()
            )));
        }
        let mut j = 0;
        for (i, (&a, &n)) in profile.iter().zip(&self.actions).enumerate() {
            if a >= n {
                return Err(contract(format!("action {a} out of range for player {i}")));
            }
            j += a * self.strides[i];
        }
        Ok(j)
    }

    /// Action of `player` inside joint action `j`.
    #[inline]
    pub fn action_of(&self, j: usize, player: usize) -> usize {
        (j / self.strides[player]) % self.actions[player]
    }

    /// Joint action `j` with `player`'s component replaced by `a`.
    #[inline]
    pub fn with_action(&self, j: usize, player: usize, a: usize) -> usize {
        let cur = self.action_of(j, player);
        j - cur * self.strides[player] + a * self.strides[player]
    }

    pub fn decompose(&self, j: usize) -> Vec<usize> {
        (0..self.actions.len()).map(|i| self.action_of(j, i)).collect()
    }

    pub(crate) fn check_step(&self, h: usize, s: usize) -> Result<()> {
        if h >= self.horizon {
            return Err(contract(format!("step {h} outside 0..{}", self.horizon)));
        }
        if s >= self.n_states {
            return Err(contract(format!("state {s} outside 0..{}", self.n_states)));
        }
        Ok(())
    }
}

/// Reward vector and successor state from one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub next_state: usize,
}

/// A finite-horizon multi-agent environment with tabular dynamics.
///
/// Rewards are indexed `[h][s][j][k]` with `k < reward_dim()`; zero-sum kinds
/// have `reward_dim() == 1` and player 1's reward is the negation of player
/// 0's. Transitions are indexed `[h][s][j][s']`.
#[derive(Debug, Clone)]
pub struct MsdmEnv {
    kind: EnvKind,
    shape: Shape,
    initial_state: usize,
    reward_dim: usize,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
    noise: RewardNoise,
    linear: Option<Arc<LinearEnvSpec>>,
}

impl MsdmEnv {
    /// Validates and builds an environment from dense tables.
    pub fn new(
        kind: EnvKind,
        shape: Shape,
        initial_state: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        noise: RewardNoise,
    ) -> Result<Self> {
        let n = shape.n_players();
        match kind {
            EnvKind::Bandit | EnvKind::LinearBandit => {
                if n != 1 || shape.horizon != 1 || shape.n_states != 1 {
                    return Err(contract("bandits must have one player, H = 1 and S = 1"));
                }
            }
            EnvKind::Mdp if n != 1 => return Err(contract("an MDP has exactly one player")),
            EnvKind::ZerosumMg | EnvKind::LinearMg if n != 2 => {
                return Err(contract("zero-sum Markov games have exactly two players"))
            }
            EnvKind::GeneralsumMg if n < 2 => {
                return Err(contract("general-sum games need at least two players"))
            }
            _ => {}
        }
        if initial_state >= shape.n_states {
            return Err(contract("initial state out of range"));
        }
        let reward_dim = if kind.is_zero_sum() { 1 } else { n };
        let cells = shape.horizon * shape.n_states * shape.n_joint;
        if rewards.len() != cells * reward_dim {
            return Err(contract(format!(
                "reward table has {} entries, expected {}",
                rewards.len(),
                cells * reward_dim
            )));
        }
        if transitions.len() != cells * shape.n_states {
            return Err(contract(format!(
                "transition table has {} entries, expected {}",
                transitions.len(),
                cells * shape.n_states
            )));
        }
        if let Some(pos) = rewards.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(contract(format!(
                "mean reward {} at flat index {pos} outside [0, 1]",
                rewards[pos]
            )));
        }
        for (row_idx, row) in transitions.chunks(shape.n_states).enumerate() {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(contract(format!("transition row {row_idx} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(contract(format!(
                    "transition row {row_idx} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            kind,
            shape,
            initial_state,
            reward_dim,
            rewards,
            transitions,
            noise,
            linear: None,
        })
    }

    /// K-armed bandit with the given arm means.
    pub fn bandit(means: &[f64], noise: RewardNoise) -> Result<Self> {
        let shape = Shape::new(1, 1, vec![means.len()])?;
        let transitions = vec![1.0; means.len()];
        Self::new(EnvKind::Bandit, shape, 0, means.to_vec(), transitions, noise)
    }

    /// One-shot zero-sum matrix game; `matrix[a][b]` is the row player's mean reward.
    pub fn matrix_game(matrix: &[Vec<f64>], noise: RewardNoise) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(contract("ragged payoff matrix"));
        }
        let shape = Shape::new(1, 1, vec![rows, cols])?;
        let rewards: Vec<f64> = matrix.iter().flatten().copied().collect();
        let transitions = vec![1.0; rows * cols];
        Self::new(EnvKind::ZerosumMg, shape, 0, rewards, transitions, noise)
    }

    pub(crate) fn with_linear(mut self, spec: Arc<LinearEnvSpec>) -> Self {
        self.linear = Some(spec);
        self
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn n_states(&self) -> usize {
        self.shape.n_states
    }

    pub fn n_players(&self) -> usize {
        self.shape.n_players()
    }

    pub fn actions(&self) -> &[usize] {
        self.shape.actions()
    }

    pub fn n_joint(&self) -> usize {
        self.shape.n_joint
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    /// Length of realized reward vectors (1 for zero-sum kinds).
    pub fn reward_dim(&self) -> usize {
        self.reward_dim
    }

    pub fn linear_spec(&self) -> Option<&Arc<LinearEnvSpec>> {
        self.linear.as_ref()
    }

    /// The same dynamics with a different noise law.
    pub fn with_noise(&self, noise: RewardNoise) -> Self {
        let mut env = self.clone();
        env.noise = noise;
        env
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.shape.n_states + s) * self.shape.n_joint + j
    }

    /// Mean reward of `player`; zero-sum kinds report `-r` for player 1.
    #[inline]
    pub fn reward_mean(&self, h: usize, s: usize, j: usize, player: usize) -> f64 {
        let c = self.cell(h, s, j);
        if self.kind.is_zero_sum() {
            let r = self.rewards[c];
            if player == 0 {
                r
            } else {
                -r
            }
        } else {
            self.rewards[c * self.reward_dim + player]
        }
    }

    /// Stored mean reward vector for one cell (length `reward_dim()`).
    #[inline]
    pub fn reward_row(&self, h: usize, s: usize, j: usize) -> &[f64] {
        let c = self.cell(h, s, j) * self.reward_dim;
        &self.rewards[c..c + self.reward_dim]
    }

    /// Next-state distribution for one cell.
    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, j: usize) -> &[f64] {
        let c = self.cell(h, s, j) * self.shape.n_states;
        &self.transitions[c..c + self.shape.n_states]
    }

    /// Samples one step. `j` is a joint-action index.
    pub fn step<R: Rng + ?Sized>(
        &self,
        h: usize,
        s: usize,
        j: usize,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        self.shape.check_step(h, s)?;
        if j >= self.shape.n_joint {
            return Err(Error::Contract(format!(
                "joint action {j} outside 0..{}",
                self.shape.n_joint
            )));
        }
        let rewards = self
            .reward_row(h, s, j)
            .iter()
            .map(|&mean| match self.noise {
                RewardNoise::None => mean,
                RewardNoise::Bernoulli => {
                    if rng.random::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        let row = self.transition_row(h, s, j);
        let next_state = sample_index(row, rng);
        Ok(StepOutcome {
            rewards,
            next_state,
        })
    }
}

/// Inverse-CDF draw from a probability vector. Point masses consume no randomness.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    if let Some(i) = probs.iter().position(|&p| p == 1.0) {
        return i;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn two_state() -> MsdmEnv {
        let shape = Shape::new(1, 2, vec![1]).unwrap();
        MsdmEnv::new(
            EnvKind::Mdp,
            shape,
            0,
            vec![0.3, 0.3],
            vec![0.5, 0.5, 0.5, 0.5],
            RewardNoise::Bernoulli,
        )
        .unwrap()
    }

    #[test]
    fn joint_index_roundtrip() {
        let shape = Shape::new(1, 1, vec![2, 3, 4]).unwrap();
        for j in 0..shape.n_joint() {
            let p = shape.decompose(j);
            assert_eq!(shape.joint_index(&p).unwrap(), j);
            for player in 0..3 {
                for a in 0..shape.actions()[player] {
                    let k = shape.with_action(j, player, a);
                    assert_eq!(shape.action_of(k, player), a);
                    for other in (0..3).filter(|&o| o != player) {
                        assert_eq!(shape.action_of(k, other), p[other]);
                    }
                }
            }
        }
        assert_eq!(shape.joint_index(&[1, 2, 3]).unwrap(), 23);
    }

    #[test]
    fn deterministic_step_returns_table_entry() {
        let shape = Shape::new(1, 2, vec![2]).unwrap();
        let env = MsdmEnv::new(
            EnvKind::Mdp,
            shape,
            0,
            vec![0.25, 0.75, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            RewardNoise::None,
        )
        .unwrap();
        let mut rng = stream(1, Stream::Env);
        let out = env.step(0, 0, 1, &mut rng).unwrap();
        assert_eq!(out.rewards, vec![0.75]);
        assert_eq!(out.next_state, 0);
        let out = env.step(0, 0, 0, &mut rng).unwrap();
        assert_eq!(out.rewards, vec![0.25]);
        assert_eq!(out.next_state, 1);
    }

    #[test]
    fn next_state_frequency_matches_law() {
        let env = two_state();
        let mut rng = stream(11, Stream::Env);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| env.step(0, 0, 0, &mut rng).unwrap().next_state == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn bernoulli_reward_mean() {
        let env = two_state();
        let mut rng = stream(12, Stream::Env);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| env.step(0, 1, 0, &mut rng).unwrap().rewards[0])
            .sum();
        assert!((total / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn out_of_range_is_contract_error() {
        let env = two_state();
        let mut rng = stream(1, Stream::Env);
        assert!(matches!(env.step(1, 0, 0, &mut rng), Err(Error::Contract(_))));
        assert!(matches!(env.step(0, 2, 0, &mut rng), Err(Error::Contract(_))));
        assert!(matches!(env.step(0, 0, 1, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn rejects_bad_tables() {
        let shape = Shape::new(1, 2, vec![1]).unwrap();
        let bad_row = MsdmEnv::new(
            EnvKind::Mdp,
            shape.clone(),
            0,
            vec![0.0, 0.0],
            vec![0.6, 0.6, 0.5, 0.5],
            RewardNoise::None,
        );
        assert!(bad_row.is_err());
        let negative = MsdmEnv::new(
            EnvKind::Mdp,
            shape.clone(),
            0,
            vec![0.0, 0.0],
            vec![1.5, -0.5, 0.5, 0.5],
            RewardNoise::None,
        );
        assert!(negative.is_err());
        let bad_reward = MsdmEnv::new(
            EnvKind::Mdp,
            shape,
            0,
            vec![1.2, 0.0],
            vec![1.0, 0.0, 0.5, 0.5],
            RewardNoise::None,
        );
        assert!(bad_reward.is_err());
    }

    #[test]
    fn zero_sum_player_one_is_negated() {
        let env = MsdmEnv::matrix_game(&[vec![0.3, 0.0], vec![0.1, 0.2]], RewardNoise::None)
            .unwrap();
        assert_eq!(env.reward_dim(), 1);
        assert_eq!(env.reward_mean(0, 0, 0, 0), 0.3);
        assert_eq!(env.reward_mean(0, 0, 0, 1), -0.3);
    }
}
