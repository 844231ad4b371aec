use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::alpha::alpha;
use super::ftrl::WeightedFtrl;
use crate::batch::{trigger_set, BatchPlan, CountKey, Feedback, MultiBatchedAlgorithm, VisitCountDoubles};
use crate::error::{contract, Result};
use crate::msdm::{EnvKind, JointPolicy, MsdmEnv, Shape, Transition};
use crate::rng::Rng;

/// `beta(t) = c sqrt(H^3 A iota / t)`.
pub fn vlearning_bonus(c: f64, h: usize, a: usize, iota: f64, t: u64) -> f64 {
    c * ((h as f64).powi(3) * a as f64 * iota / t as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VLearningParams {
    /// Bonus constant `c`.
    pub c: f64,
    pub p: f64,
    /// Scale on the FTRL learning rate and exploration floor.
    pub ftrl_scale: f64,
}

impl Default for VLearningParams {
    fn default() -> Self {
        Self {
            c: 0.5,
            p: 0.01,
            ftrl_scale: 1.0,
        }
    }
}

/// Per-player statistics.
#[derive(Debug, Clone)]
struct PlayerState {
    /// `(H + 1) * S`, last layer zero.
    v: Vec<f64>,
    v_tilde: Vec<f64>,
    bandits: Vec<WeightedFtrl>,
    iota: f64,
}

/// Multi-batched V-learning: every player runs its own weighted FTRL at each
/// `(h, s)` and the executed product policy is refreshed only when a visit
/// counter reaches a power of two.
pub struct VLearning {
    shape: Shape,
    params: VLearningParams,
    zero_sum: bool,
    triggers: Vec<u64>,
    /// `N_h(s)`, shared by all players since everyone sees the same trajectory.
    counts: Vec<u64>,
    players: Vec<PlayerState>,
    policy: Option<Arc<JointPolicy>>,
    clamped: u64,
    refreshes: usize,
}

impl VLearning {
    pub fn new(env: &MsdmEnv, k: usize, params: VLearningParams) -> Result<Self> {
        if env.kind().is_linear() {
            return Err(contract("v_learning runs on tabular environments"));
        }
        if !(params.c >= 0.0) || !(params.p > 0.0 && params.p < 1.0) || !(params.ftrl_scale > 0.0) {
            return Err(contract("v_learning needs c >= 0, p in (0, 1) and a positive FTRL scale"));
        }
        let shape = env.shape().clone();
        let (hh, ns) = (shape.horizon(), shape.n_states());
        let players = shape
            .actions()
            .iter()
            .map(|&a| {
                let iota = ((hh * ns * a * k.max(1)) as f64 / params.p).ln();
                let mut v = vec![0.0; (hh + 1) * ns];
                for h in 0..hh {
                    v[h * ns..(h + 1) * ns].fill((hh - h) as f64);
                }
                PlayerState {
                    v_tilde: v.clone(),
                    v,
                    bandits: vec![WeightedFtrl::new(a, hh, params.ftrl_scale); hh * ns],
                    iota,
                }
            })
            .collect();
        Ok(Self {
            zero_sum: env.kind() == EnvKind::ZerosumMg,
            triggers: trigger_set(k, hh),
            counts: vec![0; hh * ns],
            players,
            policy: None,
            clamped: 0,
            refreshes: 0,
            shape,
            params,
        })
    }

    /// `V_h(s)` of `player` (zero-based `h`).
    pub fn value(&self, player: usize, h: usize, s: usize) -> f64 {
        self.players[player].v[h * self.shape.n_states() + s]
    }

    pub fn ftrl_policy(&self, player: usize, h: usize, s: usize) -> &[f64] {
        self.players[player].bandits[h * self.shape.n_states() + s].policy()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn clamped_losses(&self) -> u64 {
        self.clamped
    }

    /// Reward of `player` on the learner's `[0, 1]` scale; in zero-sum games
    /// player 1 learns from `1 - r`.
    fn reward(&self, t: &Transition, player: usize) -> f64 {
        if self.zero_sum {
            if player == 0 {
                t.rewards[0]
            } else {
                1.0 - t.rewards[0]
            }
        } else {
            t.rewards[player]
        }
    }

    /// Processes one arrived transition at step `h`.
    pub fn step_update(&mut self, h: usize, t: &Transition) {
        let ns = self.shape.n_states();
        let hh = self.shape.horizon();
        let cell = h * ns + t.state;
        self.counts[cell] += 1;
        let n = self.counts[cell];
        let a_t = alpha(hh, n);
        let profile = self.shape.decompose(t.action);
        for i in 0..self.players.len() {
            let r = self.reward(t, i);
            let prob = match &self.policy {
                Some(p) => p.marginal(h, t.state, i)[profile[i]],
                None => 1.0 / self.shape.actions()[i] as f64,
            };
            let pl = &mut self.players[i];
            let v_next = pl.v[(h + 1) * ns + t.next_state];
            let bonus = vlearning_bonus(self.params.c, hh, self.shape.actions()[i], pl.iota, n);
            pl.v_tilde[cell] = (1.0 - a_t) * pl.v_tilde[cell] + a_t * (r + v_next + bonus);
            pl.v[cell] = pl.v_tilde[cell].min((hh - h) as f64);
            let raw = (hh as f64 - r - v_next) / hh as f64;
            let loss = raw.clamp(0.0, 1.0);
            if loss != raw {
                self.clamped += 1;
            }
            pl.bandits[cell].update(profile[i], loss, prob);
        }
    }

    fn snapshot_policy(&self) -> Result<JointPolicy> {
        let ns = self.shape.n_states();
        let cells = self.shape.horizon() * ns;
        let marginals = self
            .players
            .iter()
            .map(|pl| {
                let mut flat = Vec::new();
                for c in 0..cells {
                    flat.extend_from_slice(pl.bandits[c].policy());
                }
                flat
            })
            .collect();
        JointPolicy::product(self.shape.clone(), marginals)
    }
}

impl MultiBatchedAlgorithm for VLearning {
    fn name(&self) -> &'static str {
        "v_learning"
    }

    fn next_batch(&mut self, _rng: &mut Rng) -> Result<BatchPlan> {
        if self.policy.is_some() {
            self.refreshes += 1;
        }
        let policy = Arc::new(self.snapshot_policy()?);
        self.policy = Some(policy.clone());
        let key = CountKey::StepState { n_states: self.shape.n_states() };
        let stop = VisitCountDoubles::new(self.counts.clone(), key, self.triggers.clone());
        Ok(BatchPlan::single(policy, Box::new(stop)))
    }

    fn ingest(&mut self, feedback: &Feedback<'_>) {
        for (h, t) in feedback.trajectory.steps.iter().enumerate() {
            self.step_update(h, t);
        }
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({
            "c": self.params.c,
            "p": self.params.p,
            "ftrl_scale": self.params.ftrl_scale,
            "refreshes": self.refreshes,
            "clamped_losses": self.clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdm::RewardNoise;

    #[test]
    fn bonus_plug_in() {
        assert!((vlearning_bonus(1.0, 2, 2, 1.0, 8) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn first_visit_ignores_initialization() {
        let env = MsdmEnv::bandit(&[0.4, 0.9], RewardNoise::None).unwrap();
        let mut alg = VLearning::new(&env, 100, VLearningParams::default()).unwrap();
        let t = Transition { state: 0, action: 1, rewards: vec![0.9], next_state: 0 };
        alg.step_update(0, &t);
        let iota = alg.players[0].iota;
        let want = (0.9 + vlearning_bonus(0.5, 1, 2, iota, 1)).min(1.0);
        assert!((alg.value(0, 0, 0) - want).abs() < 1e-12);
        assert!((alg.players[0].v_tilde[0] - (0.9 + vlearning_bonus(0.5, 1, 2, iota, 1))).abs() < 1e-12);
    }

    #[test]
    fn values_stay_below_cap() {
        let shape = Shape::new(2, 2, vec![2, 2]).unwrap();
        let rewards: Vec<f64> = (0..2 * 2 * 4 * 2).map(|i| (i % 3) as f64 / 2.0).collect();
        let transitions: Vec<f64> = (0..2 * 2 * 4).flat_map(|_| [0.5, 0.5]).collect();
        let env = MsdmEnv::new(EnvKind::GeneralsumMg, shape, 0, rewards, transitions, RewardNoise::Bernoulli).unwrap();
        let mut alg = VLearning::new(&env, 500, VLearningParams::default()).unwrap();
        crate::batch::run_undelayed(&mut alg, &env, 500, 4).unwrap();
        for i in 0..2 {
            for h in 0..2 {
                for s in 0..2 {
                    assert!(alg.value(i, h, s) <= (2 - h) as f64);
                }
            }
        }
        assert_eq!(alg.clamped_losses(), 0);
    }
}
