//! Matrix-game solvers and CCE certification.
//!
//! Zero-sum games are solved exactly by a small simplex LP (a multiplicative
//! weights route is kept for cross-checks). CCEs of an optimistic/pessimistic
//! pair come from optimistic-hedge self-play, certified by [`verify_cce`].

mod cce;
mod matrix;
mod zero_sum;

pub use cce::{
    cce_budget, solve_cce_pair, solve_cce_pair_with_budget, verify_cce, CceNotConverged,
    CceSolution,
};
pub(crate) use cce::cce_or_best;
pub use matrix::{JointDist, Matrix, QPairMatrix};
pub(crate) use zero_sum::softmax;
pub use zero_sum::{duality_gap, solve_zero_sum, solve_zero_sum_mwu, ZeroSumSolution};

/// Per-state tolerance used inside learners.
pub const LEARNER_TOL: f64 = 1e-3;
