use crate::equilibrium::softmax;

use super::alpha::alpha;

/// Weighted FTRL with entropy regularization and implicit exploration, for
/// bandit feedback.
///
/// After `t` updates the leader is `theta(b) ∝ exp(-eta_{t+1} L_t(b))` where
/// `L_t = sum_i (alpha_t^i / alpha_t) lhat_i` and
/// `lhat_i(b) = loss_i 1{b = b_i} / (p_i + gamma_i)`. Both `eta_t` and
/// `gamma_t` equal `scale * sqrt(H ln B / (B t))`.
#[derive(Debug, Clone)]
pub struct WeightedFtrl {
    horizon: usize,
    scale: f64,
    t: u64,
    cum: Vec<f64>,
    theta: Vec<f64>,
}

impl WeightedFtrl {
    pub fn new(n_actions: usize, horizon: usize, scale: f64) -> Self {
        assert!(n_actions > 0, "bandit needs an action");
        Self {
            horizon,
            scale,
            t: 0,
            cum: vec![0.0; n_actions],
            theta: vec![1.0 / n_actions as f64; n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.cum.len()
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn policy(&self) -> &[f64] {
        &self.theta
    }

    /// `eta_t = gamma_t` for round `t >= 1`.
    pub fn rate(&self, t: u64) -> f64 {
        let b = self.n_actions() as f64;
        if b <= 1.0 {
            return 0.0;
        }
        self.scale * (self.horizon as f64 * b.ln() / (b * t as f64)).sqrt()
    }

    /// Feeds the loss of `action`, which was drawn with probability `prob`.
    pub fn update(&mut self, action: usize, loss: f64, prob: f64) {
        let t = self.t + 1;
        let gamma = self.rate(t);
        let keep = if t == 1 {
            0.0
        } else {
            let prev = alpha(self.horizon, t - 1);
            let cur = alpha(self.horizon, t);
            prev * (1.0 - cur) / cur
        };
        for c in self.cum.iter_mut() {
            *c *= keep;
        }
        if prob + gamma > 0.0 {
            self.cum[action] += loss / (prob + gamma);
        }
        self.t = t;
        let neg: Vec<f64> = self.cum.iter().map(|c| -c).collect();
        self.theta = softmax(&neg, self.rate(t + 1));
    }
}
