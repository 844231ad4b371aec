//! Multi-batched learners.
//!
//! Each learner implements [`MultiBatchedAlgorithm`](crate::batch::MultiBatchedAlgorithm):
//! it fixes a policy and a stopping rule per batch and only touches its
//! statistics inside `ingest`, so it runs unchanged under delayed feedback.

pub mod alpha;
pub mod design;
mod elimination;
pub mod ftrl;
mod lsvi_mg;
mod nash_vi;
mod phase;
mod vlearning;

pub use alpha::{alpha, alpha_tail_sum, alpha_weights};
pub use design::{g_optimal_design, g_value, Design};
pub use elimination::{mab_eliminate, ArmStats, BatchedElimination};
pub use ftrl::WeightedFtrl;
pub use lsvi_mg::{LsviMg, LsviMgParams};
pub use nash_vi::{log_term, nashvi_bonus_beta, nashvi_bonus_gamma, NashVi, NashViParams};
pub use phase::{phase_target, regress, surviving_arms, PhaseElimination, PhaseState};
pub use vlearning::{vlearning_bonus, VLearning, VLearningParams};
