use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::batch::{BatchPlan, DeterminantGrows, Feedback, MultiBatchedAlgorithm};
use crate::equilibrium::{cce_budget, cce_or_best, Matrix, QPairMatrix};
use crate::error::{contract, Error, Result};
use crate::msdm::{EnvKind, JointPolicy, LinearEnvSpec, MsdmEnv, Shape};
use crate::rng::Rng;

use super::nash_vi::log_term;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsviMgParams {
    /// Ridge `lambda`.
    pub lambda: f64,
    /// Bonus scale; `None` means `0.1 d H sqrt(iota)`.
    pub beta: Option<f64>,
    /// Determinant growth threshold.
    pub eta: f64,
    pub p: f64,
    pub tol: f64,
    pub max_cce_iters: usize,
}

impl Default for LsviMgParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: None,
            eta: 2.0,
            p: 0.01,
            tol: crate::equilibrium::LEARNER_TOL,
            max_cce_iters: 20_000,
        }
    }
}

/// One observed step: feature cell `(s, j)`, reward, next state.
#[derive(Debug, Clone, Copy)]
struct Sample {
    s: usize,
    j: usize,
    r: f64,
    next: usize,
}

/// Least-squares value iteration for linear zero-sum Markov games with a
/// determinant-doubling recompute rule.
pub struct LsviMg {
    shape: Shape,
    spec: Arc<LinearEnvSpec>,
    params: LsviMgParams,
    beta: f64,
    a: usize,
    b: usize,
    data: Vec<Vec<Sample>>,
    gram: Vec<DMatrix<f64>>,
    w_upper: Vec<DVector<f64>>,
    w_lower: Vec<DVector<f64>>,
    /// `(H + 1) * S`, last layer zero.
    v_upper: Vec<f64>,
    v_lower: Vec<f64>,
    q_upper: Vec<f64>,
    q_lower: Vec<f64>,
    policy: Option<Arc<JointPolicy>>,
    recomputes: usize,
}

impl LsviMg {
    pub fn new(env: &MsdmEnv, k: usize, params: LsviMgParams) -> Result<Self> {
        if env.kind() != EnvKind::LinearMg {
            return Err(contract("lsvi_mg runs on linear Markov games"));
        }
        if !(params.lambda > 0.0) || !(params.eta > 1.0) || !(params.tol > 0.0) {
            return Err(contract("lsvi_mg needs lambda > 0, eta > 1 and tol > 0"));
        }
        let spec = env.linear_spec().ok_or_else(|| contract("linear game without features"))?.clone();
        let shape = env.shape().clone();
        let (hh, d) = (shape.horizon(), spec.dim());
        let iota = log_term(&shape, k, params.p);
        let beta = params.beta.unwrap_or(0.1 * d as f64 * hh as f64 * iota.sqrt());
        let (a, b) = (shape.actions()[0], shape.actions()[1]);
        let cells = hh * shape.n_states() * shape.n_joint();
        Ok(Self {
            beta,
            a,
            b,
            data: vec![Vec::new(); hh],
            gram: vec![DMatrix::identity(d, d) * params.lambda; hh],
            w_upper: vec![DVector::zeros(d); hh],
            w_lower: vec![DVector::zeros(d); hh],
            v_upper: vec![0.0; (hh + 1) * shape.n_states()],
            v_lower: vec![0.0; (hh + 1) * shape.n_states()],
            q_upper: vec![0.0; cells],
            q_lower: vec![0.0; cells],
            policy: None,
            recomputes: 0,
            shape,
            spec,
            params,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gram(&self, h: usize) -> &DMatrix<f64> {
        &self.gram[h]
    }

    pub fn w_upper(&self, h: usize) -> &DVector<f64> {
        &self.w_upper[h]
    }

    pub fn q_upper(&self) -> &[f64] {
        &self.q_upper
    }

    pub fn q_lower(&self) -> &[f64] {
        &self.q_lower
    }

    pub fn recomputes(&self) -> usize {
        self.recomputes
    }

    pub fn observe(&mut self, h: usize, s: usize, j: usize, r: f64, next: usize) {
        let phi = self.spec.feature(s, j);
        self.gram[h].ger(1.0, phi, phi, 1.0);
        self.data[h].push(Sample { s, j, r, next });
    }

    pub fn recompute(&mut self) -> Result<Arc<JointPolicy>> {
        let (hh, ns, nj) = (self.shape.horizon(), self.shape.n_states(), self.shape.n_joint());
        let hf = hh as f64;
        let d = self.spec.dim();
        let mut table = vec![0.0; hh * ns * nj];
        for h in (0..hh).rev() {
            let chol = self.gram[h]
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numerical("Gram matrix lost definiteness".into()))?;
            let mut m_up = DVector::zeros(d);
            let mut m_low = DVector::zeros(d);
            let o = (h + 1) * ns;
            for x in &self.data[h] {
                let phi = self.spec.feature(x.s, x.j);
                m_up.axpy(x.r + self.v_upper[o + x.next], phi, 1.0);
                m_low.axpy(x.r + self.v_lower[o + x.next], phi, 1.0);
            }
            let wu = chol.solve(&m_up);
            let wl = chol.solve(&m_low);
            for s in 0..ns {
                let c0 = (h * ns + s) * nj;
                for j in 0..nj {
                    let phi = self.spec.feature(s, j);
                    let bonus = self.beta * phi.dot(&chol.solve(phi)).max(0.0).sqrt();
                    let up = (wu.dot(phi) + bonus).clamp(0.0, hf);
                    let low = (wl.dot(phi) - bonus).clamp(0.0, hf);
                    self.q_upper[c0 + j] = up;
                    self.q_lower[c0 + j] = low.min(up);
                }
                let up = Matrix::from_vec(self.a, self.b, self.q_upper[c0..c0 + nj].to_vec())?;
                let low = Matrix::from_vec(self.a, self.b, self.q_lower[c0..c0 + nj].to_vec())?;
                let pair = QPairMatrix::new(up, low)?;
                let budget = cce_budget(&pair, self.params.tol).min(self.params.max_cce_iters);
                let dist = cce_or_best(&pair, self.params.tol, budget);
                self.v_upper[h * ns + s] = dist.expect(pair.upper());
                self.v_lower[h * ns + s] = dist.expect(pair.lower());
                table[c0..c0 + nj].copy_from_slice(dist.as_slice());
            }
            self.w_upper[h] = wu;
            self.w_lower[h] = wl;
        }
        let policy = Arc::new(JointPolicy::correlated(self.shape.clone(), table)?);
        self.policy = Some(policy.clone());
        Ok(policy)
    }
}

impl MultiBatchedAlgorithm for LsviMg {
    fn name(&self) -> &'static str {
        "lsvi_mg"
    }

    fn next_batch(&mut self, _rng: &mut Rng) -> Result<BatchPlan> {
        if self.policy.is_some() {
            self.recomputes += 1;
        }
        let policy = self.recompute()?;
        let stop = DeterminantGrows::new(self.params.eta, self.spec.clone(), self.gram.clone())?;
        Ok(BatchPlan::single(policy, Box::new(stop)))
    }

    fn ingest(&mut self, feedback: &Feedback<'_>) {
        for (h, t) in feedback.trajectory.steps.iter().enumerate() {
            self.observe(h, t.state, t.action, t.rewards[0], t.next_state);
        }
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({
            "lambda": self.params.lambda,
            "beta": self.beta,
            "eta": self.params.eta,
            "tol": self.params.tol,
            "recomputes": self.recomputes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msdm::linear::linear_mg;
    use crate::msdm::RewardNoise;

    fn one_state_game(d: usize) -> MsdmEnv {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let features: Vec<DVector<f64>> = (0..4)
            .map(|j| {
                let mut v = DVector::zeros(d);
                v[j % d] = 1.0;
                v
            })
            .collect();
        let theta = vec![DVector::from_element(d, 0.5)];
        let measures = vec![DMatrix::from_element(d, 1, 1.0)];
        linear_mg(shape, 0, features, theta, measures, RewardNoise::None).unwrap()
    }

    #[test]
    fn empty_regression_is_pure_bonus() {
        let env = one_state_game(2);
        let params = LsviMgParams { beta: Some(0.7), ..Default::default() };
        let mut alg = LsviMg::new(&env, 10, params).unwrap();
        alg.recompute().unwrap();
        assert!(alg.q_upper().iter().all(|&q| (q - 0.7).abs() < 1e-12));
        assert!(alg.q_lower().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn one_datapoint() {
        let env = one_state_game(2);
        let beta = 0.3;
        let params = LsviMgParams { beta: Some(beta), ..Default::default() };
        let mut alg = LsviMg::new(&env, 10, params).unwrap();
        alg.observe(0, 0, 0, 1.0, 0);
        alg.recompute().unwrap();
        assert!((alg.w_upper(0)[0] - 0.5).abs() < 1e-12);
        let want = (0.5 + beta / 2f64.sqrt()).min(1.0);
        assert!((alg.q_upper()[0] - want).abs() < 1e-12);
    }
}
