//! Multi-agent sequential decision making: environments, policies and
//! trajectories, plus exact dynamic-programming oracles.
//!
//! One environment type covers every setting: a bandit is `H = 1, S = 1`, an
//! MDP has one player, and Markov games have two or more. Step indices are
//! zero-based throughout (`h = 0..H`), players too.
//!
//! Joint actions are encoded as a single mixed-radix index with player 0 the
//! most significant digit, so for two players `j = a * B + b` and the per-state
//! slice of a table is an `A x B` row-major matrix.

mod env;
pub mod linear;
pub mod loader;
pub mod oracle;
mod policy;
mod trajectory;

pub use env::{EnvKind, MsdmEnv, RewardNoise, Shape, StepOutcome};
pub(crate) use env::sample_index;
pub use linear::LinearEnvSpec;
pub use oracle::{
    best_response_value, cce_gap, nash_value, policy_value, NashSolution,
};
pub use policy::{JointPolicy, PolicyTables};
pub use trajectory::{run_episode, Trajectory, Transition};
