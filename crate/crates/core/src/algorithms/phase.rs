use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::design::{g_optimal_design, Design};
use crate::batch::{BatchPlan, CountAtLeast, Feedback, MultiBatchedAlgorithm, Never};
use crate::error::{contract, Result};
use crate::msdm::{EnvKind, JointPolicy, MsdmEnv};
use crate::rng::Rng;

const RIDGE: f64 = 1e-10;

/// Pulls of arm `a` in phase `l`: `ceil(2 d pi(a) / eps^2 * ln(k l (l+1) / delta))`.
pub fn phase_target(d: usize, weight: f64, l: usize, delta: f64, k: usize) -> u64 {
    let eps = 0.5f64.powi(l as i32);
    let lf = l as f64;
    let log = (k as f64 * lf * (lf + 1.0) / delta).ln();
    ((2.0 * d as f64 * weight / (eps * eps)) * log).ceil().max(1.0) as u64
}

/// Least squares `V^-1 sum a x` with a tiny ridge if `V` is singular.
pub fn regress(gram: &DMatrix<f64>, moment: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = gram.clone().cholesky() {
        return ch.solve(moment);
    }
    log::warn!("phase elimination: singular design matrix, adding {RIDGE:e} I");
    let d = gram.nrows();
    let reg = gram + DMatrix::identity(d, d) * RIDGE;
    match reg.clone().cholesky() {
        Some(ch) => ch.solve(moment),
        None => reg.pseudo_inverse(1e-14).map(|p| p * moment).unwrap_or_else(|_| DVector::zeros(d)),
    }
}

/// Arms `a` in `active` with `max_b <theta, b - a> <= 2 eps`.
pub fn surviving_arms(
    features: &[DVector<f64>],
    active: &[usize],
    theta: &DVector<f64>,
    eps: f64,
) -> Vec<usize> {
    let scores: Vec<f64> = active.iter().map(|&a| theta.dot(&features[a])).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    active
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| best - s <= 2.0 * eps)
        .map(|(&a, _)| a)
        .collect()
}

/// State of the current phase.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub phase: usize,
    pub active: Vec<usize>,
    pub design: Option<Design>,
    /// `(arm, pulls)` on the design support.
    pub targets: Vec<(usize, u64)>,
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
    pub theta: Option<DVector<f64>>,
}

impl PhaseState {
    pub fn eps(&self) -> f64 {
        0.5f64.powi(self.phase as i32)
    }
}

/// Phase elimination with a G-optimal design for linear bandits.
///
/// Each phase is one batch. Only trajectories generated inside the phase feed
/// its regression; late arrivals from older phases are dropped.
pub struct PhaseElimination {
    features: Vec<DVector<f64>>,
    delta: f64,
    design_eps: f64,
    state: PhaseState,
    batch: usize,
    committed: Option<usize>,
    arm_policies: Vec<Arc<JointPolicy>>,
    dropped: usize,
}

impl PhaseElimination {
    /// `delta` defaults to `1 / K` when `None`.
    pub fn new(env: &MsdmEnv, k: usize, delta: Option<f64>, design_eps: f64) -> Result<Self> {
        if env.kind() != EnvKind::LinearBandit {
            return Err(contract("phase elimination runs on linear bandits"));
        }
        let spec = env.linear_spec().ok_or_else(|| contract("linear bandit without features"))?;
        let n = env.n_joint();
        let features: Vec<DVector<f64>> = (0..n).map(|a| spec.feature(0, a).clone()).collect();
        let delta = delta.unwrap_or(1.0 / k.max(1) as f64);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(contract("delta must lie in (0, 1)"));
        }
        let shape = env.shape().clone();
        let arm_policies = (0..n)
            .map(|a| JointPolicy::deterministic(shape.clone(), |_, _| a).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let d = spec.dim();
        Ok(Self {
            features,
            delta,
            design_eps,
            state: PhaseState {
                phase: 0,
                active: (0..n).collect(),
                design: None,
                targets: Vec::new(),
                gram: DMatrix::zeros(d, d),
                moment: DVector::zeros(d),
                theta: None,
            },
            batch: 0,
            committed: None,
            arm_policies,
            dropped: 0,
        })
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn committed(&self) -> Option<usize> {
        self.committed
    }

    fn close_phase(&mut self) {
        let st = &mut self.state;
        let theta = regress(&st.gram, &st.moment);
        st.active = surviving_arms(&self.features, &st.active, &theta, st.eps());
        st.theta = Some(theta);
    }
}

impl MultiBatchedAlgorithm for PhaseElimination {
    fn name(&self) -> &'static str {
        "phase_elim"
    }

    fn next_batch(&mut self, _rng: &mut Rng) -> Result<BatchPlan> {
        if self.batch > 0 && self.committed.is_none() {
            self.close_phase();
        }
        self.batch += 1;
        if self.committed.is_none() && self.state.active.len() == 1 {
            self.committed = Some(self.state.active[0]);
        }
        if let Some(arm) = self.committed {
            return Ok(BatchPlan::single(self.arm_policies[arm].clone(), Box::new(Never)));
        }
        let st = &mut self.state;
        st.phase += 1;
        let feats: Vec<DVector<f64>> = st.active.iter().map(|&a| self.features[a].clone()).collect();
        let design = g_optimal_design(&feats, self.design_eps)?;
        st.targets = design
            .support()
            .into_iter()
            .map(|i| {
                let t = phase_target(design.dim, design.weights[i], st.phase, self.delta, self.features.len());
                (st.active[i], t)
            })
            .collect();
        st.design = Some(design);
        let d = st.gram.nrows();
        st.gram = DMatrix::zeros(d, d);
        st.moment = DVector::zeros(d);
        let mut schedule = Vec::new();
        for (slot, &(_, t)) in st.targets.iter().enumerate() {
            schedule.extend(std::iter::repeat_n(slot, t as usize));
        }
        let total = schedule.len();
        Ok(BatchPlan {
            policies: st.targets.iter().map(|&(a, _)| self.arm_policies[a].clone()).collect(),
            schedule,
            stop: Box::new(CountAtLeast::new(total)?),
        })
    }

    fn ingest(&mut self, feedback: &Feedback<'_>) {
        if feedback.batch != self.batch || self.committed.is_some() {
            self.dropped += 1;
            return;
        }
        for t in &feedback.trajectory.steps {
            let x = &self.features[t.action];
            self.state.gram.ger(1.0, x, x, 1.0);
            self.state.moment.axpy(t.rewards[0], x, 1.0);
        }
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({
            "phase": self.state.phase,
            "active": self.state.active,
            "committed": self.committed,
            "delta": self.delta,
            "design_eps": self.design_eps,
            "dropped_stragglers": self.dropped,
        })
    }
}
