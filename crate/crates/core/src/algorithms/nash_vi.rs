use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::batch::{trigger_set, BatchPlan, CountKey, Feedback, MultiBatchedAlgorithm, VisitCountDoubles};
use crate::equilibrium::{cce_budget, cce_or_best, Matrix, QPairMatrix};
use crate::error::{contract, Result};
use crate::msdm::{EnvKind, JointPolicy, MsdmEnv, Shape};
use crate::rng::Rng;

/// `beta = C (sqrt(var * iota / max(n, 1)) + H^2 S iota / max(n, 1))`.
pub fn nashvi_bonus_beta(n: u64, var: f64, h: usize, s: usize, iota: f64, c: f64) -> f64 {
    let n = n.max(1) as f64;
    let hf = h as f64;
    c * ((var.max(0.0) * iota / n).sqrt() + hf * hf * s as f64 * iota / n)
}

/// `gamma = (C / H) * P(Vbar - Vlow)`.
pub fn nashvi_bonus_gamma(p_gap: f64, h: usize, c: f64) -> f64 {
    c / h as f64 * p_gap
}

/// `iota = ln(S * prod(A_i) * K * H / p)`.
pub fn log_term(shape: &Shape, k: usize, p: f64) -> f64 {
    let x = shape.n_states() as f64 * shape.n_joint() as f64 * k as f64 * shape.horizon() as f64;
    (x / p).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NashViParams {
    /// Bonus constant `C`.
    pub c: f64,
    /// Failure probability inside `iota`.
    pub p: f64,
    /// Per-state CCE tolerance.
    pub tol: f64,
    /// Cap on CCE self-play iterations per state.
    pub max_cce_iters: usize,
}

impl Default for NashViParams {
    fn default() -> Self {
        Self {
            c: 0.5,
            p: 0.01,
            tol: crate::equilibrium::LEARNER_TOL,
            max_cce_iters: 20_000,
        }
    }
}

/// Multi-batched optimistic Nash value iteration for two-player zero-sum
/// Markov games. A one-player environment (MDP or bandit) is the `B = 1`
/// case, where the CCE step reduces to an argmax.
pub struct NashVi {
    shape: Shape,
    params: NashViParams,
    iota: f64,
    triggers: Vec<u64>,
    a: usize,
    b: usize,
    /// `N_h(s, j)`, indexed `(h * S + s) * J + j`.
    counts: Vec<u64>,
    /// `N_h(s, j, s')`.
    next_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    q_upper: Vec<f64>,
    q_lower: Vec<f64>,
    /// `(H + 1) * S`, last layer zero.
    v_upper: Vec<f64>,
    v_lower: Vec<f64>,
    policy: Option<Arc<JointPolicy>>,
    recomputes: usize,
}

impl NashVi {
    pub fn new(env: &MsdmEnv, k: usize, params: NashViParams) -> Result<Self> {
        match env.kind() {
            EnvKind::Bandit | EnvKind::Mdp | EnvKind::ZerosumMg => {}
            other => return Err(contract(format!("nash_vi does not support {other:?} environments"))),
        }
        if !(params.c >= 0.0) || !(params.p > 0.0 && params.p < 1.0) || !(params.tol > 0.0) {
            return Err(contract("nash_vi needs C >= 0, p in (0, 1) and tol > 0"));
        }
        let shape = env.shape().clone();
        let (a, b) = match shape.actions() {
            [a] => (*a, 1),
            [a, b] => (*a, *b),
            _ => return Err(contract("nash_vi needs one or two players")),
        };
        let (hh, s, j) = (shape.horizon(), shape.n_states(), shape.n_joint());
        let cells = hh * s * j;
        Ok(Self {
            iota: log_term(&shape, k, params.p),
            triggers: trigger_set(k, hh),
            a,
            b,
            counts: vec![0; cells],
            next_counts: vec![0; cells * s],
            reward_sums: vec![0.0; cells],
            q_upper: vec![hh as f64; cells],
            q_lower: vec![0.0; cells],
            v_upper: vec![0.0; (hh + 1) * s],
            v_lower: vec![0.0; (hh + 1) * s],
            policy: None,
            recomputes: 0,
            shape,
            params,
        })
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    /// Overrides `iota` (tests and ablations).
    pub fn with_iota(mut self, iota: f64) -> Self {
        self.iota = iota;
        self
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn q_upper(&self) -> &[f64] {
        &self.q_upper
    }

    pub fn q_lower(&self) -> &[f64] {
        &self.q_lower
    }

    pub fn v_upper(&self) -> &[f64] {
        &self.v_upper
    }

    pub fn v_lower(&self) -> &[f64] {
        &self.v_lower
    }

    pub fn policy(&self) -> Option<&Arc<JointPolicy>> {
        self.policy.as_ref()
    }

    /// Records one observed transition.
    pub fn observe(&mut self, h: usize, s: usize, j: usize, reward: f64, next: usize) {
        let c = self.cell(h, s, j);
        self.counts[c] += 1;
        self.reward_sums[c] += reward;
        self.next_counts[c * self.shape.n_states() + next] += 1;
    }

    #[inline]
    fn cell(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.shape.n_states() + s) * self.shape.n_joint() + j
    }

    /// Backward pass over all steps; refreshes `Q`, `V` and the policy.
    pub fn recompute(&mut self) -> Result<Arc<JointPolicy>> {
        let (hh, ns, nj) = (self.shape.horizon(), self.shape.n_states(), self.shape.n_joint());
        let hf = hh as f64;
        let c = self.params.c;
        let mut table = vec![0.0; hh * ns * nj];
        let mut p_hat = vec![0.0; ns];
        for h in (0..hh).rev() {
            let (vu_next, vl_next) = {
                let o = (h + 1) * ns;
                (self.v_upper[o..o + ns].to_vec(), self.v_lower[o..o + ns].to_vec())
            };
            for s in 0..ns {
                for j in 0..nj {
                    let cell = self.cell(h, s, j);
                    let n = self.counts[cell];
                    let r_hat = if n == 0 { 0.0 } else { self.reward_sums[cell] / n as f64 };
                    if n == 0 {
                        p_hat.fill(1.0 / ns as f64);
                    } else {
                        let row = &self.next_counts[cell * ns..(cell + 1) * ns];
                        for (p, &m) in p_hat.iter_mut().zip(row) {
                            *p = m as f64 / n as f64;
                        }
                    }
                    let pv_up: f64 = p_hat.iter().zip(&vu_next).map(|(p, v)| p * v).sum();
                    let pv_low: f64 = p_hat.iter().zip(&vl_next).map(|(p, v)| p * v).sum();
                    let mid_mean = 0.5 * (pv_up + pv_low);
                    let var: f64 = p_hat
                        .iter()
                        .zip(vu_next.iter().zip(&vl_next))
                        .map(|(p, (u, l))| p * (0.5 * (u + l) - mid_mean).powi(2))
                        .sum();
                    let beta = nashvi_bonus_beta(n, var, hh, ns, self.iota, c);
                    let gamma = nashvi_bonus_gamma(pv_up - pv_low, hh, c);
                    self.q_upper[cell] = (r_hat + pv_up + gamma + beta).clamp(0.0, hf);
                    self.q_lower[cell] = (r_hat + pv_low - gamma - beta).clamp(0.0, hf);
                }
                let o = self.cell(h, s, 0);
                let up = Matrix::from_vec(self.a, self.b, self.q_upper[o..o + nj].to_vec())?;
                let low = Matrix::from_vec(self.a, self.b, self.q_lower[o..o + nj].to_vec())?;
                let pair = QPairMatrix::new(up, low)?;
                let budget = cce_budget(&pair, self.params.tol).min(self.params.max_cce_iters);
                let dist = cce_or_best(&pair, self.params.tol, budget);
                self.v_upper[h * ns + s] = dist.expect(pair.upper());
                self.v_lower[h * ns + s] = dist.expect(pair.lower());
                table[o..o + nj].copy_from_slice(dist.as_slice());
            }
        }
        let policy = Arc::new(JointPolicy::correlated(self.shape.clone(), table)?);
        self.policy = Some(policy.clone());
        Ok(policy)
    }
}

impl MultiBatchedAlgorithm for NashVi {
    fn name(&self) -> &'static str {
        "nash_vi"
    }

    fn next_batch(&mut self, _rng: &mut Rng) -> Result<BatchPlan> {
        if self.policy.is_some() {
            self.recomputes += 1;
        }
        let policy = self.recompute()?;
        let key = CountKey::StepStateAction {
            n_states: self.shape.n_states(),
            n_joint: self.shape.n_joint(),
        };
        let stop = VisitCountDoubles::new(self.counts.clone(), key, self.triggers.clone());
        Ok(BatchPlan::single(policy, Box::new(stop)))
    }

    fn ingest(&mut self, feedback: &Feedback<'_>) {
        for (h, t) in feedback.trajectory.steps.iter().enumerate() {
            self.observe(h, t.state, t.action, t.rewards[0], t.next_state);
        }
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({
            "c": self.params.c,
            "p": self.params.p,
            "iota": self.iota,
            "tol": self.params.tol,
            "max_cce_iters": self.params.max_cce_iters,
            "recomputes": self.recomputes,
            "trigger_set_size": self.triggers.len(),
        })
    }
}
