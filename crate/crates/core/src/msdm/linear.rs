//! Linear structure: `r_h = phi^T theta_h` and `p_h(.|s, j) = phi^T mu_h`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};
use crate::msdm::{EnvKind, MsdmEnv, RewardNoise, Shape};

const NUM_TOL: f64 = 1e-12;

/// Known feature map plus the parameters that generate rewards and transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEnvSpec {
    dim: usize,
    n_states: usize,
    n_joint: usize,
    /// Flat `[s][j]`.
    features: Vec<DVector<f64>>,
    /// One reward vector per step.
    theta: Vec<DVector<f64>>,
    /// One `d x S` measure matrix per step (empty for linear bandits).
    measures: Vec<DMatrix<f64>>,
}

impl LinearEnvSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    #[inline]
    pub fn feature(&self, s: usize, j: usize) -> &DVector<f64> {
        &self.features[s * self.n_joint + j]
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }

    pub fn theta(&self, h: usize) -> &DVector<f64> {
        &self.theta[h]
    }

    fn check_features(features: &[DVector<f64>], dim: usize) -> Result<()> {
        for (i, f) in features.iter().enumerate() {
            if f.len() != dim {
                return Err(contract(format!("feature {i} has length {}, expected {dim}", f.len())));
            }
            if f.norm() > 1.0 + NUM_TOL {
                return Err(contract(format!("feature {i} has norm {} > 1", f.norm())));
            }
        }
        Ok(())
    }

    fn induced_reward(f: &DVector<f64>, theta: &DVector<f64>, what: &str) -> Result<f64> {
        let r = f.dot(theta);
        if !(-NUM_TOL..=1.0 + NUM_TOL).contains(&r) {
            return Err(contract(format!("{what}: induced reward {r} outside [0, 1]")));
        }
        Ok(r.clamp(0.0, 1.0))
    }
}

/// Finite-armed linear bandit; arm `i` has feature `arms[i]`.
pub fn linear_bandit(
    arms: Vec<DVector<f64>>,
    theta: DVector<f64>,
    noise: RewardNoise,
) -> Result<MsdmEnv> {
    if arms.is_empty() {
        return Err(contract("linear bandit needs at least one arm"));
    }
    let dim = theta.len();
    LinearEnvSpec::check_features(&arms, dim)?;
    let rewards = arms
        .iter()
        .enumerate()
        .map(|(i, a)| LinearEnvSpec::induced_reward(a, &theta, &format!("arm {i}")))
        .collect::<Result<Vec<_>>>()?;
    let n = arms.len();
    let shape = Shape::new(1, 1, vec![n])?;
    let env = MsdmEnv::new(EnvKind::LinearBandit, shape, 0, rewards, vec![1.0; n], noise)?;
    let spec = LinearEnvSpec {
        dim,
        n_states: 1,
        n_joint: n,
        features: arms,
        theta: vec![theta],
        measures: Vec::new(),
    };
    Ok(env.with_linear(Arc::new(spec)))
}

/// Two-player zero-sum linear Markov game on a finite state set.
///
/// `features` is flat `[s][j]` with `j = a * B + b`; `measures[h]` is `d x S`.
pub fn linear_mg(
    shape: Shape,
    initial_state: usize,
    features: Vec<DVector<f64>>,
    theta: Vec<DVector<f64>>,
    measures: Vec<DMatrix<f64>>,
    noise: RewardNoise,
) -> Result<MsdmEnv> {
    let (hz, ns, nj) = (shape.horizon(), shape.n_states(), shape.n_joint());
    if theta.len() != hz || measures.len() != hz {
        return Err(contract("need one theta and one measure matrix per step"));
    }
    if features.len() != ns * nj {
        return Err(contract(format!(
            "expected {} feature vectors, got {}",
            ns * nj,
            features.len()
        )));
    }
    let dim = theta[0].len();
    LinearEnvSpec::check_features(&features, dim)?;
    for (h, (t, m)) in theta.iter().zip(&measures).enumerate() {
        if t.len() != dim || m.nrows() != dim || m.ncols() != ns {
            return Err(contract(format!("step {h}: parameter shapes do not match d = {dim}")));
        }
    }
    let mut rewards = Vec::with_capacity(hz * ns * nj);
    let mut transitions = Vec::with_capacity(hz * ns * nj * ns);
    for h in 0..hz {
        for s in 0..ns {
            for j in 0..nj {
                let f = &features[s * nj + j];
                rewards.push(LinearEnvSpec::induced_reward(
                    f,
                    &theta[h],
                    &format!("h={h} s={s} j={j}"),
                )?);
                let row = measures[h].tr_mul(f);
                for (s2, &p) in row.iter().enumerate() {
                    if p < -NUM_TOL {
                        return Err(contract(format!(
                            "h={h} s={s} j={j}: induced transition to {s2} is negative ({p})"
                        )));
                    }
                    transitions.push(p.max(0.0));
                }
                let start = transitions.len() - ns;
                let sum: f64 = transitions[start..].iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(contract(format!(
                        "h={h} s={s} j={j}: induced transition row sums to {sum}"
                    )));
                }
                transitions[start..].iter_mut().for_each(|p| *p /= sum);
            }
        }
    }
    let env = MsdmEnv::new(EnvKind::LinearMg, shape, initial_state, rewards, transitions, noise)?;
    let spec = LinearEnvSpec {
        dim,
        n_states: ns,
        n_joint: nj,
        features,
        theta,
        measures,
    };
    Ok(env.with_linear(Arc::new(spec)))
}
