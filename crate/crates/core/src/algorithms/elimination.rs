use std::sync::Arc;

use serde_json::json;

use crate::batch::{BatchPlan, CountAtLeast, Feedback, MultiBatchedAlgorithm, Never};
use crate::error::{contract, Result};
use crate::msdm::{EnvKind, JointPolicy, MsdmEnv, Shape};
use crate::rng::Rng;

/// Pull counts and empirical means for a finite-armed bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
    pub active: Vec<usize>,
}

impl ArmStats {
    pub fn new(n_arms: usize) -> Self {
        Self {
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            active: (0..n_arms).collect(),
        }
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.counts[arm] as f64
        }
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }
}

/// Active arms surviving one elimination round.
///
/// Arm `i` goes iff `mean_i + radius(n_i) < max_j (mean_j - radius(n_j))`.
pub fn mab_eliminate(stats: &ArmStats, radius: impl Fn(u64) -> f64) -> Vec<usize> {
    if stats.active.len() <= 1 {
        return stats.active.clone();
    }
    let lcb = stats
        .active
        .iter()
        .map(|&i| stats.mean(i) - radius(stats.counts[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = stats
        .active
        .iter()
        .copied()
        .filter(|&i| stats.mean(i) + radius(stats.counts[i]) >= lcb)
        .collect();
    if kept.is_empty() {
        stats.active.clone()
    } else {
        kept
    }
}

/// Batched successive elimination on a geometric grid of `M = ceil(ln K)` batches.
///
/// Batch `l` spends `t_l - t_{l-1}` pulls (with `t_l = floor(K^(l/M))`) round
/// robin over the active arms, then eliminates with radius
/// `sqrt(2 log(2 A K l (l+1)) / n)`. After the last grid batch, or once one
/// arm is left, the empirically best arm is played until the end.
pub struct BatchedElimination {
    shape: Shape,
    k: usize,
    n_batches: usize,
    stats: ArmStats,
    batch: usize,
    committed: Option<usize>,
    arm_policies: Vec<Arc<JointPolicy>>,
}

impl BatchedElimination {
    pub fn new(env: &MsdmEnv, k: usize) -> Result<Self> {
        if !matches!(env.kind(), EnvKind::Bandit | EnvKind::LinearBandit) {
            return Err(contract("batched elimination runs on bandits"));
        }
        if k == 0 {
            return Err(contract("K must be at least 1"));
        }
        let shape = env.shape().clone();
        let n_arms = shape.n_joint();
        let arm_policies = (0..n_arms)
            .map(|a| JointPolicy::deterministic(shape.clone(), |_, _| a).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_batches: ((k as f64).ln().ceil() as usize).max(1),
            shape,
            k,
            stats: ArmStats::new(n_arms),
            batch: 0,
            committed: None,
            arm_policies,
        })
    }

    pub fn n_grid_batches(&self) -> usize {
        self.n_batches
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    pub fn committed(&self) -> Option<usize> {
        self.committed
    }

    fn grid(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            (self.k as f64).powf(l as f64 / self.n_batches as f64).floor() as usize
        }
    }

    pub fn radius(&self, l: usize, n: u64) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        let a = self.shape.n_joint() as f64;
        let l = l as f64;
        (2.0 * (2.0 * a * self.k as f64 * l * (l + 1.0)).ln() / n as f64).sqrt()
    }

    fn best_arm(&self) -> usize {
        let means: Vec<f64> = self.stats.active.iter().map(|&i| self.stats.mean(i)).collect();
        let (pos, _) = crate::msdm::oracle::argmax_lowest(&means);
        self.stats.active[pos]
    }
}

impl MultiBatchedAlgorithm for BatchedElimination {
    fn name(&self) -> &'static str {
        "batched_elim"
    }

    fn next_batch(&mut self, _rng: &mut Rng) -> Result<BatchPlan> {
        if self.batch > 0 && self.committed.is_none() {
            let l = self.batch;
            let survivors = mab_eliminate(&self.stats, |n| self.radius(l, n));
            self.stats.active = survivors;
        }
        self.batch += 1;
        if self.committed.is_none()
            && (self.batch > self.n_batches || self.stats.active.len() == 1)
        {
            self.committed = Some(self.best_arm());
        }
        if let Some(arm) = self.committed {
            return Ok(BatchPlan::single(self.arm_policies[arm].clone(), Box::new(Never)));
        }
        let l = self.batch;
        let active = &self.stats.active;
        let budget = self.grid(l).saturating_sub(self.grid(l - 1));
        let per_arm = budget.div_ceil(active.len()).max(1);
        let policies = active.iter().map(|&a| self.arm_policies[a].clone()).collect();
        Ok(BatchPlan {
            policies,
            schedule: (0..active.len()).collect(),
            stop: Box::new(CountAtLeast::new(per_arm * active.len())?),
        })
    }

    fn ingest(&mut self, feedback: &Feedback<'_>) {
        for t in &feedback.trajectory.steps {
            self.stats.record(t.action, t.rewards[0]);
        }
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({
            "grid_batches": self.n_batches,
            "active": self.stats.active,
            "committed": self.committed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(means: &[f64], n: u64) -> ArmStats {
        let mut s = ArmStats::new(means.len());
        for (i, &m) in means.iter().enumerate() {
            s.counts[i] = n;
            s.sums[i] = m * n as f64;
        }
        s
    }

    #[test]
    fn plug_in_example() {
        let radius = |n: u64| (2.0 * (2.0f64 * 1e4).ln() / n as f64).sqrt();
        assert!((radius(100) - 0.445).abs() < 1e-3);
        assert_eq!(mab_eliminate(&stats(&[0.9, 0.1], 100), radius), vec![0, 1]);
        assert!((radius(1000) - 0.141).abs() < 1e-3);
        assert_eq!(mab_eliminate(&stats(&[0.9, 0.1], 1000), radius), vec![0]);
    }

    #[test]
    fn identical_arms_survive() {
        let s = stats(&[0.5, 0.5, 0.5], 7);
        assert_eq!(mab_eliminate(&s, |_| 0.0), vec![0, 1, 2]);
    }

    #[test]
    fn single_arm_unchanged() {
        let mut s = stats(&[0.5, 0.9], 10);
        s.active = vec![0];
        assert_eq!(mab_eliminate(&s, |_| 0.0), vec![0]);
    }
}
