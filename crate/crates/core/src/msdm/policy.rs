use std::borrow::Cow;

use rand::Rng;

use crate::error::{contract, Result};
use crate::msdm::env::{sample_index, Shape};

const SIMPLEX_TOL: f64 = 1e-9;

/// Storage for a Markov joint policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyTables {
    /// One distribution over joint actions per `(h, s)`, flat `[h][s][j]`.
    Correlated(Vec<f64>),
    /// Independent per-player marginals; entry `i` is flat `[h][s][a_i]`.
    Product(Vec<Vec<f64>>),
}

/// A (possibly correlated) Markov policy: per step and state, a distribution
/// over joint actions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    shape: Shape,
    tables: PolicyTables,
}

impl JointPolicy {
    pub fn correlated(shape: Shape, table: Vec<f64>) -> Result<Self> {
        let expect = shape.horizon() * shape.n_states() * shape.n_joint();
        if table.len() != expect {
            return Err(contract(format!(
                "correlated table has {} entries, expected {expect}",
                table.len()
            )));
        }
        for (i, dist) in table.chunks(shape.n_joint()).enumerate() {
            check_simplex(dist).map_err(|e| contract(format!("cell {i}: {e}")))?;
        }
        Ok(Self {
            shape,
            tables: PolicyTables::Correlated(table),
        })
    }

    pub fn product(shape: Shape, marginals: Vec<Vec<f64>>) -> Result<Self> {
        if marginals.len() != shape.n_players() {
            return Err(contract("one marginal table per player required"));
        }
        for (i, table) in marginals.iter().enumerate() {
            let a = shape.actions()[i];
            if table.len() != shape.horizon() * shape.n_states() * a {
                return Err(contract(format!("player {i} marginal table has wrong size")));
            }
            for dist in table.chunks(a) {
                check_simplex(dist).map_err(|e| contract(format!("player {i}: {e}")))?;
            }
        }
        Ok(Self {
            shape,
            tables: PolicyTables::Product(marginals),
        })
    }

    /// Uniform product policy.
    pub fn uniform(shape: Shape) -> Self {
        let marginals = shape
            .actions()
            .iter()
            .map(|&a| vec![1.0 / a as f64; shape.horizon() * shape.n_states() * a])
            .collect();
        Self {
            shape,
            tables: PolicyTables::Product(marginals),
        }
    }

    /// Point mass on `choose(h, s)` (a joint-action index) everywhere.
    pub fn deterministic(shape: Shape, choose: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let nj = shape.n_joint();
        let mut table = vec![0.0; shape.horizon() * shape.n_states() * nj];
        for h in 0..shape.horizon() {
            for s in 0..shape.n_states() {
                let j = choose(h, s);
                if j >= nj {
                    return Err(contract(format!("joint action {j} out of range")));
                }
                table[(h * shape.n_states() + s) * nj + j] = 1.0;
            }
        }
        Ok(Self {
            shape,
            tables: PolicyTables::Correlated(table),
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn tables(&self) -> &PolicyTables {
        &self.tables
    }

    pub fn is_product(&self) -> bool {
        matches!(self.tables, PolicyTables::Product(_))
    }

    /// Distribution over joint actions at `(h, s)`.
    pub fn joint_distribution(&self, h: usize, s: usize) -> Cow<'_, [f64]> {
        let nj = self.shape.n_joint();
        let cell = h * self.shape.n_states() + s;
        match &self.tables {
            PolicyTables::Correlated(t) => Cow::Borrowed(&t[cell * nj..(cell + 1) * nj]),
            PolicyTables::Product(m) => {
                let mut out = vec![1.0; nj];
                for (j, p) in out.iter_mut().enumerate() {
                    for (i, table) in m.iter().enumerate() {
                        let a = self.shape.actions()[i];
                        *p *= table[cell * a + self.shape.action_of(j, i)];
                    }
                }
                Cow::Owned(out)
            }
        }
    }

    /// Marginal of `player` at `(h, s)`.
    pub fn marginal(&self, h: usize, s: usize, player: usize) -> Vec<f64> {
        let a = self.shape.actions()[player];
        let cell = h * self.shape.n_states() + s;
        match &self.tables {
            PolicyTables::Product(m) => m[player][cell * a..(cell + 1) * a].to_vec(),
            PolicyTables::Correlated(_) => {
                let joint = self.joint_distribution(h, s);
                let mut out = vec![0.0; a];
                for (j, &p) in joint.iter().enumerate() {
                    out[self.shape.action_of(j, player)] += p;
                }
                out
            }
        }
    }

    /// Samples a joint action at `(h, s)`.
    pub fn sample<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        let nj = self.shape.n_joint();
        let cell = h * self.shape.n_states() + s;
        match &self.tables {
            PolicyTables::Correlated(t) => sample_index(&t[cell * nj..(cell + 1) * nj], rng),
            PolicyTables::Product(m) => {
                let mut j = 0;
                for (i, table) in m.iter().enumerate() {
                    let a = self.shape.actions()[i];
                    let ai = sample_index(&table[cell * a..(cell + 1) * a], rng);
                    j = self.shape.with_action(j, i, ai);
                }
                j
            }
        }
    }
}

fn check_simplex(dist: &[f64]) -> std::result::Result<(), String> {
    if dist.iter().any(|&p| p < -SIMPLEX_TOL || !p.is_finite()) {
        return Err("negative probability".into());
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("distribution sums to {sum}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_joint_matches_outer_product() {
        let shape = Shape::new(1, 1, vec![2, 3]).unwrap();
        let pol = JointPolicy::product(
            shape,
            vec![vec![0.25, 0.75], vec![0.5, 0.3, 0.2]],
        )
        .unwrap();
        let joint = pol.joint_distribution(0, 0);
        assert!((joint[0] - 0.125).abs() < 1e-15);
        assert!((joint[5] - 0.15).abs() < 1e-15);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(pol.marginal(0, 0, 1), vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn correlated_marginal() {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let pol = JointPolicy::correlated(shape, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(pol.marginal(0, 0, 0), vec![0.5, 0.5]);
        assert_eq!(pol.marginal(0, 0, 1), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_non_simplex() {
        let shape = Shape::new(1, 1, vec![2]).unwrap();
        assert!(JointPolicy::correlated(shape.clone(), vec![0.5, 0.6]).is_err());
        assert!(JointPolicy::correlated(shape, vec![1.5, -0.5]).is_err());
    }
}
