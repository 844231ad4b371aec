use serde::Serialize;

use crate::error::Result;
use crate::msdm::{best_response_value, cce_gap, policy_value, EnvKind, JointPolicy, MsdmEnv};

/// Which per-episode regret notion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    /// `V* - V^pi`.
    SingleAgent,
    /// `V^{dagger, nu} - V^{mu, dagger}`: sum of both players' best-response gains.
    ZeroSum,
    /// Largest best-response gain over players.
    GeneralSum,
}

/// Exact per-policy regret from dynamic programming.
pub struct RegretOracle<'a> {
    env: &'a MsdmEnv,
    kind: RegretKind,
    v_star: f64,
}

impl<'a> RegretOracle<'a> {
    pub fn new(env: &'a MsdmEnv) -> Result<Self> {
        let kind = match env.kind() {
            EnvKind::Bandit | EnvKind::LinearBandit | EnvKind::Mdp => RegretKind::SingleAgent,
            EnvKind::ZerosumMg | EnvKind::LinearMg => RegretKind::ZeroSum,
            EnvKind::GeneralsumMg => RegretKind::GeneralSum,
        };
        let v_star = if kind == RegretKind::SingleAgent {
            best_response_value(env, &JointPolicy::uniform(env.shape().clone()), 0)?
        } else {
            0.0
        };
        Ok(Self { env, kind, v_star })
    }

    pub fn kind(&self) -> RegretKind {
        self.kind
    }

    /// Optimal value for single-agent settings.
    pub fn optimal_value(&self) -> Option<f64> {
        (self.kind == RegretKind::SingleAgent).then_some(self.v_star)
    }

    pub fn instantaneous(&self, policy: &JointPolicy) -> Result<f64> {
        match self.kind {
            RegretKind::SingleAgent => Ok(self.v_star - policy_value(self.env, policy, 0)?),
            RegretKind::ZeroSum => {
                // player 1's rewards are -r, so its best-response value is -min_nu V^{mu, nu}
                Ok(best_response_value(self.env, policy, 0)? + best_response_value(self.env, policy, 1)?)
            }
            RegretKind::GeneralSum => cce_gap(self.env, policy),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdm::RewardNoise;

    #[test]
    fn bandit_gap() {
        let env = MsdmEnv::bandit(&[0.2, 0.7], RewardNoise::None).unwrap();
        let o = RegretOracle::new(&env).unwrap();
        let p = JointPolicy::deterministic(env.shape().clone(), |_, _| 0).unwrap();
        assert!((o.instantaneous(&p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_sum_nash_has_no_regret() {
        let env = MsdmEnv::matrix_game(&[vec![1.0, 0.0], vec![0.0, 1.0]], RewardNoise::None).unwrap();
        let o = RegretOracle::new(&env).unwrap();
        let uniform = JointPolicy::uniform(env.shape().clone());
        assert!(o.instantaneous(&uniform).unwrap().abs() < 1e-12);
        let pure = JointPolicy::deterministic(env.shape().clone(), |_, _| 0).unwrap();
        // row gains 0 by deviating, column gains 1
        assert!((o.instantaneous(&pure).unwrap() - 1.0).abs() < 1e-12);
    }
}
