use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{contract, Result};
use crate::msdm::{LinearEnvSpec, Trajectory};

/// Batch-termination predicate over the current batch's observed feedback.
///
/// Criteria latch: once met they stay met.
pub trait StopCriterion: Send {
    fn observe(&mut self, trajectory: &Trajectory);
    fn is_met(&self) -> bool;
}

/// Fires once `n` trajectories have been observed.
#[derive(Debug, Clone)]
pub struct CountAtLeast {
    n: usize,
    seen: usize,
}

impl CountAtLeast {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(contract("count_at_least needs n >= 1"));
        }
        Ok(Self { n, seen: 0 })
    }

    pub fn seen(&self) -> usize {
        self.seen
    }
}

impl StopCriterion for CountAtLeast {
    fn observe(&mut self, _trajectory: &Trajectory) {
        self.seen += 1;
    }

    fn is_met(&self) -> bool {
        self.seen >= self.n
    }
}

/// Never fires; the run ends by truncation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Never;

impl StopCriterion for Never {
    fn observe(&mut self, _trajectory: &Trajectory) {}

    fn is_met(&self) -> bool {
        false
    }
}

/// `L = { 2^(i-1) : 2^i <= K H }`.
pub fn trigger_set(k: usize, h: usize) -> Vec<u64> {
    let kh = (k as u128) * (h as u128);
    let mut out = Vec::new();
    let mut i = 1u32;
    while i < 127 && (1u128 << i) <= kh {
        out.push(1u64 << (i - 1));
        i += 1;
    }
    out
}

/// What a visit counter is keyed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKey {
    /// `(h, s, joint action)`.
    StepStateAction { n_states: usize, n_joint: usize },
    /// `(h, s)`.
    StepState { n_states: usize },
}

impl CountKey {
    #[inline]
    pub fn index(&self, h: usize, s: usize, j: usize) -> usize {
        match *self {
            CountKey::StepStateAction { n_states, n_joint } => (h * n_states + s) * n_joint + j,
            CountKey::StepState { n_states } => h * n_states + s,
        }
    }
}

/// Fires when some visit counter reaches a value in the trigger set.
///
/// Starts from a snapshot of the learner's counts at batch start and adds the
/// current batch's observations on top.
#[derive(Debug, Clone)]
pub struct VisitCountDoubles {
    counts: Vec<u64>,
    key: CountKey,
    triggers: Vec<u64>,
    fired: bool,
}

impl VisitCountDoubles {
    pub fn new(snapshot: Vec<u64>, key: CountKey, triggers: Vec<u64>) -> Self {
        Self {
            counts: snapshot,
            key,
            triggers,
            fired: false,
        }
    }
}

impl StopCriterion for VisitCountDoubles {
    fn observe(&mut self, trajectory: &Trajectory) {
        for (h, t) in trajectory.steps.iter().enumerate() {
            let i = self.key.index(h, t.state, t.action);
            self.counts[i] += 1;
            if self.triggers.binary_search(&self.counts[i]).is_ok() {
                self.fired = true;
            }
        }
    }

    fn is_met(&self) -> bool {
        self.fired
    }
}

/// Fires when `det(Lambda_h) >= eta * det(snapshot_h)` for some step `h`.
pub struct DeterminantGrows {
    eta: f64,
    spec: Arc<LinearEnvSpec>,
    gram: Vec<DMatrix<f64>>,
    log_det_snapshot: Vec<f64>,
    fired: bool,
}

/// Relative slack on the determinant ratio so exact ratios (like 2) fire.
const DET_SLACK: f64 = 1e-12;

impl DeterminantGrows {
    pub fn new(eta: f64, spec: Arc<LinearEnvSpec>, snapshot: Vec<DMatrix<f64>>) -> Result<Self> {
        if !(eta > 1.0) {
            return Err(contract("determinant_grows needs eta > 1"));
        }
        let log_det_snapshot = snapshot.iter().map(log_det).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eta,
            spec,
            gram: snapshot,
            log_det_snapshot,
            fired: false,
        })
    }

    /// `ln det(current) - ln det(snapshot)` for step `h`.
    pub fn log_ratio(&self, h: usize) -> f64 {
        log_det(&self.gram[h]).unwrap_or(f64::INFINITY) - self.log_det_snapshot[h]
    }
}

impl StopCriterion for DeterminantGrows {
    fn observe(&mut self, trajectory: &Trajectory) {
        for (h, t) in trajectory.steps.iter().enumerate() {
            let phi = self.spec.feature(t.state, t.action);
            self.gram[h].ger(1.0, phi, phi, 1.0);
            if self.log_ratio(h) >= self.eta.ln() - DET_SLACK {
                self.fired = true;
            }
        }
    }

    fn is_met(&self) -> bool {
        self.fired
    }
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
pub(crate) fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    let ch = m
        .clone()
        .cholesky()
        .ok_or_else(|| contract("Gram matrix is not positive definite"))?;
    Ok(2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}
