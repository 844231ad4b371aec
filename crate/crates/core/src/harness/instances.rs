//! Small fixed environments used by the verify suite, examples and tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::Result;
use crate::msdm::linear::{linear_bandit, linear_mg};
use crate::msdm::{EnvKind, MsdmEnv, RewardNoise, Shape};
use crate::rng::{stream, Stream};

/// Bernoulli bandit with the given means.
pub fn bernoulli_bandit(means: &[f64]) -> Result<MsdmEnv> {
    MsdmEnv::bandit(means, RewardNoise::Bernoulli)
}

/// Five arms with consecutive gaps of 0.1.
pub fn five_arm_bandit() -> Result<MsdmEnv> {
    bernoulli_bandit(&[0.9, 0.8, 0.7, 0.6, 0.5])
}

fn random_simplex(rng: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Random tabular two-player zero-sum Markov game (`seed` fixes the tables).
pub fn random_zero_sum_mg(states: usize, a: usize, b: usize, horizon: usize, seed: u64) -> Result<MsdmEnv> {
    let mut rng = stream(seed, Stream::Misc);
    let shape = Shape::new(horizon, states, vec![a, b])?;
    let cells = horizon * states * a * b;
    let rewards: Vec<f64> = (0..cells).map(|_| rng.random::<f64>()).collect();
    let transitions: Vec<f64> = (0..cells).flat_map(|_| random_simplex(&mut rng, states)).collect();
    MsdmEnv::new(EnvKind::ZerosumMg, shape, 0, rewards, transitions, RewardNoise::Bernoulli)
}

/// The `S = 3, A = B = 2, H = 3` zero-sum game used for Nash-VI checks.
pub fn nash_vi_game() -> Result<MsdmEnv> {
    random_zero_sum_mg(3, 2, 2, 3, 20_240_601)
}

/// Linear zero-sum Markov game whose features lie on the probability simplex
/// over `d` latent factors, so transitions are mixtures of `d` fixed laws.
pub fn random_linear_mg(d: usize, states: usize, horizon: usize, seed: u64) -> Result<MsdmEnv> {
    let mut rng = stream(seed, Stream::Misc);
    let shape = Shape::new(horizon, states, vec![2, 2])?;
    let nj = shape.n_joint();
    let features: Vec<DVector<f64>> = (0..states * nj)
        .map(|_| DVector::from_vec(random_simplex(&mut rng, d)))
        .collect();
    let theta: Vec<DVector<f64>> = (0..horizon)
        .map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>()))
        .collect();
    let measures: Vec<DMatrix<f64>> = (0..horizon)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..d).map(|_| random_simplex(&mut rng, states)).collect();
            DMatrix::from_fn(d, states, |i, s| rows[i][s])
        })
        .collect();
    linear_mg(shape, 0, features, theta, measures, RewardNoise::Bernoulli)
}

/// The `d = 4, H = 3` linear game used for LSVI-MG checks.
pub fn lsvi_game() -> Result<MsdmEnv> {
    random_linear_mg(4, 3, 3, 20_240_602)
}

/// Linear bandit in `d = 3` whose arms sit on a half circle; arm `i` has
/// mean `0.5 + 0.4 cos(pi i / n)`, so arm 0 is best.
pub fn circle_linear_bandit(n_arms: usize) -> Result<MsdmEnv> {
    let arms: Vec<DVector<f64>> = (0..n_arms)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / n_arms as f64;
            DVector::from_vec(vec![0.6 * a.cos(), 0.6 * a.sin(), 0.8])
        })
        .collect();
    let theta = DVector::from_vec(vec![0.4 / 0.6, 0.0, 0.5 / 0.8]);
    linear_bandit(arms, theta, RewardNoise::Bernoulli)
}

/// Two-player general-sum game (`S = 2, A = B = 2, H = 2`) where action 0
/// ("defect") is dominant for both players at every step and state.
pub fn dominant_strategy_game() -> Result<MsdmEnv> {
    let (h, s) = (2, 2);
    let shape = Shape::new(h, s, vec![2, 2])?;
    let mut rewards = Vec::new();
    let mut transitions = Vec::new();
    for _ in 0..h {
        for st in 0..s {
            for a in 0..2 {
                for b in 0..2 {
                    let bonus = if st == 1 { 0.1 } else { 0.0 };
                    let r0 = 0.2 + 0.3 * (a == 0) as u8 as f64 + 0.3 * (b == 1) as u8 as f64 + bonus;
                    let r1 = 0.2 + 0.3 * (b == 0) as u8 as f64 + 0.3 * (a == 1) as u8 as f64 + bonus;
                    rewards.extend([r0, r1]);
                    // mutual cooperation drifts to the richer state
                    let up = if a == 1 && b == 1 { 0.8 } else { 0.3 };
                    transitions.extend([1.0 - up, up]);
                }
            }
        }
    }
    MsdmEnv::new(EnvKind::GeneralsumMg, shape, 0, rewards, transitions, RewardNoise::Bernoulli)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_build() {
        five_arm_bandit().unwrap();
        let g = nash_vi_game().unwrap();
        assert_eq!((g.n_states(), g.horizon(), g.n_joint()), (3, 3, 4));
        let l = lsvi_game().unwrap();
        assert_eq!(l.linear_spec().unwrap().dim(), 4);
        circle_linear_bandit(8).unwrap();
        dominant_strategy_game().unwrap();
    }
}
